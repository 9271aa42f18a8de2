#include "dygenc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <regex>
#include <set>

#include "dygenc/config.hpp"
#include "dygenc/errors.hpp"
#include "dygenc/rng.hpp"

namespace dygenc::synth {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[uniform(rng, 0, v.size() - 1)];
}

bool is_action(const std::string& p) {
    return p == kHolds || std::find(kActions.begin(), kActions.end(), p) != kActions.end();
}

const std::map<std::string, std::pair<std::string, std::string>>& verb_table() {
    static const std::map<std::string, std::pair<std::string, std::string>> t = {
        {"picks_up", {"pick up", "picked up"}}, {"puts_down", {"put down", "put down"}},
        {"opens", {"open", "opened"}},          {"closes", {"close", "closed"}},
        {"sits_on", {"sit on", "sat on"}},      {"throws", {"throw", "threw"}},
        {"looks_at", {"look at", "looked at"}}, {"holds", {"hold", "held"}},
    };
    return t;
}

std::optional<std::string> predicate_from_base(const std::string& phrase) {
    for (const auto& [p, forms] : verb_table())
        if (forms.first == phrase) return p;
    return std::nullopt;
}

std::optional<std::string> predicate_from_past(const std::string& phrase) {
    for (const auto& [p, forms] : verb_table())
        if (forms.second == phrase) return p;
    return std::nullopt;
}

// ---- simulation --------------------------------------------------------------

struct State {
    int near = -1;                                   // object index
    std::vector<std::pair<std::string, int>> place;  // per object: (relation, support) or ("", -1)
    int held = -1;
    std::string action;
    int action_object = -1;
};

struct Step {
    bool act;
    std::string verb;
    int object;
};

} // namespace

std::string verb_base(const std::string& predicate) { return verb_table().at(predicate).first; }
std::string verb_past(const std::string& predicate) { return verb_table().at(predicate).second; }

WorldSpec WorldSpec::defaults() {
    WorldSpec w;
    auto portable = [](const char* l, bool openable = false) {
        ObjectSpec o{l};
        o.portable = true;
        o.openable = openable;
        return o;
    };
    for (const char* l : {"cup", "phone", "towel", "pillow", "bag", "sandwich", "dish", "blanket", "shoe", "clothes",
                          "paper", "medicine", "picture", "broom", "camera", "bottle"})
        w.objects.push_back(portable(l));
    for (const char* l : {"book", "box", "laptop"}) w.objects.push_back(portable(l, true));
    for (const char* l : {"door", "window"}) {
        ObjectSpec o{l};
        o.openable = true;
        w.objects.push_back(o);
    }
    for (const char* l : {"refrigerator", "closet", "cabinet"}) {
        ObjectSpec o{l};
        o.openable = o.container = true;
        w.objects.push_back(o);
    }
    {
        ObjectSpec o{"chair"};
        o.sittable = true;
        w.objects.push_back(o);
    }
    for (const char* l : {"sofa", "bed"}) {
        ObjectSpec o{l};
        o.sittable = o.surface = true;
        w.objects.push_back(o);
    }
    for (const char* l : {"table", "shelf", "desk", "counter"}) {
        ObjectSpec o{l};
        o.surface = true;
        w.objects.push_back(o);
    }
    return w;
}

void set_world_value(WorldSpec& w, const std::string& key, const std::string& value) {
    auto u = [&](std::size_t& f) { f = parse_uint(key, value); };
    if (key == "objects_min") u(w.objects_min);
    else if (key == "objects_max") u(w.objects_max);
    else if (key == "actions_min") u(w.actions_min);
    else if (key == "actions_max") u(w.actions_max);
    else if (key == "length_shape") w.length_shape = parse_double(key, value);
    else if (key == "length_scale") w.length_scale = parse_double(key, value);
    else if (key == "min_length") u(w.min_length);
    else if (key == "max_persist") u(w.max_persist);
    else if (key == "min_questions") u(w.min_questions);
    else if (key == "max_questions") u(w.max_questions);
    else if (key == "global_dedup") w.global_dedup = parse_bool(key, value);
    else throw ConfigError("unknown world spec key '" + key + "'");
}

WorldSpec parse_world_spec(const std::string& text, const std::string& origin) {
    WorldSpec w = WorldSpec::defaults();
    for (const auto& e : parse_config_entries(text, origin)) {
        try {
            set_world_value(w, e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(origin + ":" + std::to_string(e.line) + ": " + err.what());
        }
    }
    if (!(w.length_shape > 0) || !(w.length_scale > 0)) throw ConfigError(origin + ": length_shape and length_scale must be positive");
    if (w.min_questions > w.max_questions) throw ConfigError(origin + ": min_questions exceeds max_questions");
    return w;
}

Episode simulate_episode(const WorldSpec& spec, std::uint64_t seed) {
    if (spec.objects.empty()) throw ConfigError("world spec has no objects");
    if (spec.objects_min > spec.objects_max || spec.actions_min > spec.actions_max)
        throw ConfigError("world spec: min exceeds max");
    Rng rng(seed);

    // Object selection: cover every category first, then fill at random.
    std::vector<std::size_t> pool(spec.objects.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n_obj = std::min(uniform(rng, spec.objects_min, spec.objects_max), pool.size());
    std::vector<std::size_t> chosen;
    auto take = [&](auto pred, std::size_t want) {
        for (std::size_t i : pool) {
            if (want == 0 || chosen.size() >= n_obj) return;
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end() || !pred(spec.objects[i])) continue;
            chosen.push_back(i);
            --want;
        }
    };
    take([](const ObjectSpec& o) { return o.portable; }, 3);
    take([](const ObjectSpec& o) { return o.openable && !o.portable; }, 1);
    take([](const ObjectSpec& o) { return o.sittable; }, 1);
    take([](const ObjectSpec& o) { return o.surface && !o.sittable; }, 1);
    take([](const ObjectSpec&) { return true; }, n_obj);

    // Node 0 is the person, node 1 the floor, objects follow.
    std::vector<ObjectSpec> objs;
    {
        ObjectSpec floor{"floor"};
        floor.surface = true;
        objs.push_back(floor);
    }
    for (std::size_t i : chosen) objs.push_back(spec.objects[i]);
    const int n = int(objs.size());
    std::vector<int> surfaces, containers;
    for (int i = 0; i < n; ++i) {
        if (objs[i].surface) surfaces.push_back(i);
        if (objs[i].container) containers.push_back(i);
    }

    State st;
    st.place.assign(n, {"", -1});
    for (int i = 0; i < n; ++i) {
        if (!objs[i].portable) continue;
        if (!containers.empty() && uniform(rng, 0, 3) == 0)
            st.place[i] = {"inside", pick(rng, containers)};
        else
            st.place[i] = {"on", pick(rng, surfaces)};
    }
    std::vector<bool> open(n, false);
    st.near = int(uniform(rng, 1, n - 1));

    // Act script, respecting preconditions; every (verb, object) pair occurs at most once.
    const std::size_t n_acts_target = uniform(rng, spec.actions_min, spec.actions_max);
    std::vector<Step> acts;
    {
        std::set<std::pair<std::string, int>> used;
        std::vector<bool> sim_open = open;
        auto sim_place = st.place;
        int held = -1;
        for (std::size_t a = 0; a < n_acts_target; ++a) {
            std::vector<std::pair<Step, double>> cands;
            auto add = [&](const std::string& v, int o, double w) {
                if (!used.count({v, o})) cands.push_back({Step{true, v, o}, w});
            };
            if (held >= 0) {
                add("puts_down", held, 3);
                add("throws", held, 1);
            } else {
                for (int i = 1; i < n; ++i) {
                    const auto& o = objs[i];
                    const bool reachable = sim_place[i].first != "inside" || sim_open[sim_place[i].second];
                    if (o.portable && reachable) add("picks_up", i, 3);
                    if (o.openable && !sim_open[i]) add("opens", i, 1.5);
                    if (o.openable && sim_open[i]) add("closes", i, 1.5);
                    if (o.sittable) add("sits_on", i, 1);
                    add("looks_at", i, 1);
                }
            }
            if (cands.empty()) break;
            std::vector<double> w;
            for (auto& c : cands) w.push_back(c.second);
            const Step s = cands[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)].first;
            used.insert({s.verb, s.object});
            if (s.verb == "picks_up") held = s.object;
            if (s.verb == "puts_down" || s.verb == "throws") held = -1;
            if (s.verb == "opens") sim_open[s.object] = true;
            if (s.verb == "closes") sim_open[s.object] = false;
            acts.push_back(s);
        }
    }

    // Length budget: every pick-up is followed by at least one plain holding frame.
    const double g = std::gamma_distribution<double>(spec.length_shape, spec.length_scale)(rng);
    const std::size_t length = std::max<std::size_t>(spec.min_length, std::size_t(std::lround(g)));
    auto needed = [&](std::size_t k) {
        std::size_t r = k;
        for (std::size_t i = 0; i < k; ++i) r += acts[i].verb == "picks_up";
        return r;
    };
    while (!acts.empty() && needed(acts.size()) > length) acts.pop_back();
    const std::size_t extra = length - needed(acts.size());
    std::vector<std::size_t> gap_idle(acts.size() + 1, 0);
    for (std::size_t i = 0; i < acts.size(); ++i)
        if (acts[i].verb == "picks_up") gap_idle[i + 1] = 1;
    for (std::size_t e = 0; e < extra; ++e) ++gap_idle[uniform(rng, 0, acts.size())];

    std::vector<Step> steps;
    for (std::size_t i = 0; i <= acts.size(); ++i) {
        for (std::size_t j = 0; j < gap_idle[i]; ++j) steps.push_back({false, "", -1});
        if (i < acts.size()) steps.push_back(acts[i]);
    }

    // Render: one state per step, each lasting a random number of raw frames.
    std::vector<SceneGraph> raw;
    std::vector<std::size_t> raw_t;
    bool previous_act = false;
    for (const Step& s : steps) {
        st.action.clear();
        st.action_object = -1;
        if (s.act) {
            st.near = s.object;
            st.action = s.verb;
            st.action_object = s.object;
            if (s.verb == "picks_up") {
                // The object stays in place in the pick-up frame and is held afterwards.
            } else if (s.verb == "puts_down") {
                std::vector<int> targets;
                for (int i : surfaces)
                    if (i != 0) targets.push_back(i);
                st.place[s.object] = {"on", targets.empty() ? 0 : pick(rng, targets)};
                st.held = -1;
            } else if (s.verb == "throws") {
                st.place[s.object] = {"on", 0};
                st.held = -1;
            } else if (s.verb == "opens") {
                open[s.object] = true;
            } else if (s.verb == "closes") {
                open[s.object] = false;
            }
        } else {
            if (!previous_act) {
                int to = st.near;
                while (to == st.near && n > 2) to = int(uniform(rng, 1, n - 1));
                st.near = to;
            }
        }
        std::vector<GraphNode> nodes{{0, "person"}};
        for (int i = 0; i < n; ++i) nodes.push_back({i + 1, objs[i].label});
        std::vector<GraphEdge> edges;
        edges.push_back({0, st.near + 1, "near"});
        for (int i = 0; i < n; ++i)
            if (st.place[i].second >= 0 && st.held != i) edges.push_back({i + 1, st.place[i].second + 1, st.place[i].first});
        if (!st.action.empty())
            edges.push_back({0, st.action_object + 1, st.action});
        else if (st.held >= 0)
            edges.push_back({0, st.held + 1, kHolds});
        const std::size_t persist = uniform(rng, 1, std::max<std::size_t>(1, spec.max_persist));
        for (std::size_t r = 0; r < persist; ++r) {
            raw_t.push_back(raw.size());
            raw.push_back(SceneGraph(nodes, edges));
        }
        if (s.act && s.verb == "picks_up") {
            st.held = s.object;
            st.place[s.object] = {"", -1};
        }
        previous_act = s.act;
    }
    Episode ep;
    ep.raw_frames = raw.size();
    ep.dg = compact(raw, spec.global_dedup ? CompactMode::global : CompactMode::consecutive, raw_t);
    return ep;
}

EventLog extract_events(const DynamicGraph& dg) {
    EventLog log;
    // Open runs keyed by (predicate, object label).
    std::map<std::pair<std::string, std::string>, Event> running;
    auto close_missing = [&](const std::set<std::pair<std::string, std::string>>& present, std::size_t frame) {
        for (auto it = running.begin(); it != running.end();) {
            if (present.count(it->first)) {
                ++it;
                continue;
            }
            Event e = it->second;
            e.last_frame = frame - 1;
            e.t_end = dg[frame].t;
            (e.verb == kHolds ? log.holds : log.acts).push_back(e);
            it = running.erase(it);
        }
    };
    for (std::size_t f = 0; f < dg.size(); ++f) {
        const SceneGraph& g = dg[f].graph;
        std::set<std::pair<std::string, std::string>> present;
        for (const auto& e : g.edges()) {
            const GraphNode* s = g.node(e.src);
            const GraphNode* d = g.node(e.dst);
            if (s->label != "person" || !is_action(e.predicate)) continue;
            present.insert({e.predicate, d->label});
        }
        close_missing(present, f);
        for (const auto& key : present)
            if (!running.count(key)) running.emplace(key, Event{key.first, key.second, f, f, dg[f].t, kOpenEnd});
    }
    for (auto& [key, e] : running) {
        e.last_frame = dg.size() - 1;
        (e.verb == kHolds ? log.holds : log.acts).push_back(e);
    }
    auto by_frame = [](const Event& a, const Event& b) {
        return std::tie(a.first_frame, a.verb, a.object) < std::tie(b.first_frame, b.verb, b.object);
    };
    std::sort(log.acts.begin(), log.acts.end(), by_frame);
    std::sort(log.holds.begin(), log.holds.end(), by_frame);
    return log;
}

namespace {

// ---- templates -----------------------------------------------------------------

struct Candidate {
    std::string question;
    std::string answer;
};

const Event* unique_act(const EventLog& log, const std::string& verb, const std::string& object) {
    const Event* found = nullptr;
    for (const auto& e : log.acts)
        if (e.verb == verb && e.object == object) {
            if (found) return nullptr;
            found = &e;
        }
    return found;
}

// Object of the nearest act with `verb` after (forward) or before the anchor,
// provided the opposite direction also has one with a different object.
std::optional<std::string> relative_answer(const EventLog& log, const std::string& verb, const Event& anchor,
                                           bool after) {
    const Event* next = nullptr;
    const Event* prev = nullptr;
    for (const auto& e : log.acts) {
        if (e.verb != verb) continue;
        if (e.first_frame > anchor.first_frame && !next) next = &e;
        if (e.first_frame < anchor.first_frame) prev = &e;
    }
    if (!next || !prev || next->object == prev->object) return std::nullopt;
    return after ? next->object : prev->object;
}

std::optional<std::size_t> duration(const Event& hold) {
    if (hold.t_end == kOpenEnd) return std::nullopt;
    return hold.t_end - hold.t_begin;
}

std::vector<std::string> scene_objects(const DynamicGraph& dg) {
    std::set<std::string> s;
    for (const auto& f : dg.frames())
        for (const auto& n : f.graph.nodes())
            if (n.label != "person" && n.label != "floor") s.insert(n.label);
    return {s.begin(), s.end()};
}

std::string after_question(const std::string& v1, const std::string& v2, const std::string& o, bool after) {
    return "which object did the person " + verb_base(v1) + (after ? " after" : " before") + " they " + verb_past(v2) +
           " the " + o + "?";
}

std::vector<Candidate> candidates(const std::string& tid, const DynamicGraph& dg, const EventLog& log,
                                  const WorldSpec& spec, Rng& rng) {
    std::vector<Candidate> out;
    if (tid == "AFTER" || tid == "BEFORE") {
        const bool after = tid == "AFTER";
        std::set<std::string> verbs;
        for (const auto& e : log.acts) verbs.insert(e.verb);
        for (const auto& anchor : log.acts) {
            if (!unique_act(log, anchor.verb, anchor.object)) continue;
            for (const auto& v1 : verbs)
                if (auto a = relative_answer(log, v1, anchor, after))
                    out.push_back({after_question(v1, anchor.verb, anchor.object, after), *a});
        }
    } else if (tid == "WHAT-HELD-FIRST" || tid == "WHAT-HELD-LAST") {
        std::set<std::string> held;
        for (const auto& h : log.holds) held.insert(h.object);
        if (held.size() >= 2)
            out.push_back({std::string("which object did the person hold ") + (tid == "WHAT-HELD-FIRST" ? "first" : "last") + "?",
                           tid == "WHAT-HELD-FIRST" ? log.holds.front().object : log.holds.back().object});
    } else if (tid == "EXISTS") {
        std::set<std::pair<std::string, std::string>> happened;
        for (const auto& e : log.acts) happened.insert({e.verb, e.object});
        for (const auto& e : log.holds) happened.insert({e.verb, e.object});
        std::set<std::string> verbs;
        for (const auto& [v, o] : happened) verbs.insert(v);
        std::vector<Candidate> yes, no;
        for (const auto& [v, o] : happened)
            yes.push_back({"did the person ever " + verb_base(v) + " the " + o + "?", "yes"});
        // Negatives use a verb seen in the episode on an object of a kind that
        // verb applies to, so neither part alone gives the answer away.
        auto applies = [&](const std::string& v, const std::string& label) {
            for (const auto& o : spec.objects)
                if (o.label == label) {
                    if (v == "picks_up" || v == "puts_down" || v == "throws" || v == kHolds) return o.portable;
                    if (v == "opens" || v == "closes") return o.openable;
                    if (v == "sits_on") return o.sittable;
                    return true;
                }
            return v == "looks_at";
        };
        for (const auto& v : verbs)
            for (const auto& o : scene_objects(dg))
                if (!happened.count({v, o}) && applies(v, o))
                    no.push_back({"did the person ever " + verb_base(v) + " the " + o + "?", "no"});
        const bool want_yes = std::bernoulli_distribution(0.5)(rng);
        out = want_yes ? yes : no;
    } else if (tid == "DURATION-COMPARE") {
        for (const auto& a : log.holds)
            for (const auto& b : log.holds) {
                auto da = duration(a), db = duration(b);
                if (a.object == b.object || !da || !db || *da == *db) continue;
                out.push_back({"did the person hold the " + a.object + " longer than the " + b.object + "?",
                               *da > *db ? "yes" : "no"});
            }
    } else if (tid == "COUNT-DISTINCT") {
        std::map<std::string, std::set<std::string>> objs;
        for (const auto& e : log.acts) objs[e.verb].insert(e.object);
        for (const auto& e : log.holds) objs[e.verb].insert(e.object);
        for (const auto& [v, s] : objs)
            if (s.size() >= 1 && s.size() <= 4)
                out.push_back({"how many different objects did the person " + verb_base(v) + "?", std::to_string(s.size())});
    }
    return out;
}

} // namespace

std::vector<QASample> make_questions(const DynamicGraph& dg, const WorldSpec& spec, std::uint64_t seed, Split split) {
    Rng rng(seed);
    const EventLog log = extract_events(dg);
    std::vector<std::string> order = kTemplates;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t want = uniform(rng, spec.min_questions, spec.max_questions);
    std::vector<QASample> out;
    std::set<std::string> asked;
    for (const auto& tid : order) {
        if (out.size() >= want) break;
        auto cands = candidates(tid, dg, log, spec, rng);
        if (cands.empty()) continue;
        const Candidate& c = pick(rng, cands);
        if (!asked.insert(c.question).second) continue;
        out.push_back({dg, c.question, c.answer, tid, split});
    }
    return out;
}

std::vector<QASample> generate_corpus(const WorldSpec& spec, std::size_t n_episodes, std::uint64_t seed) {
    if (n_episodes == 0) throw ConfigError("generate_corpus: need at least one episode");
    std::vector<std::size_t> perm(n_episodes);
    for (std::size_t i = 0; i < n_episodes; ++i) perm[i] = i;
    Rng split_rng(derive_seed(seed, "split"));
    std::shuffle(perm.begin(), perm.end(), split_rng);
    std::vector<Split> splits(n_episodes, Split::test);
    const std::size_t n_train = n_episodes * 8 / 10, n_val = n_episodes / 10;
    for (std::size_t r = 0; r < n_episodes; ++r)
        splits[perm[r]] = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);

    std::vector<QASample> out;
    for (std::size_t i = 0; i < n_episodes; ++i) {
        const std::uint64_t s = derive_seed(seed, i);
        const Episode ep = simulate_episode(spec, derive_seed(s, "episode"));
        auto qs = make_questions(ep.dg, spec, derive_seed(s, "questions"), splits[i]);
        for (auto& q : qs) out.push_back(std::move(q));
    }
    return out;
}

std::optional<std::string> reanswer(const QASample& sample) {
    const EventLog log = extract_events(sample.dg);
    const std::string& q = sample.question;
    std::smatch m;
    static const std::regex rel(R"(^which object did the person (.+) (after|before) they (.+) the (\w+)\?$)");
    static const std::regex held(R"(^which object did the person hold (first|last)\?$)");
    static const std::regex exists(R"(^did the person ever (.+) the (\w+)\?$)");
    static const std::regex dur(R"(^did the person hold the (\w+) longer than the (\w+)\?$)");
    static const std::regex count(R"(^how many different objects did the person (.+)\?$)");
    if (std::regex_match(q, m, held)) {
        std::set<std::string> objs;
        for (const auto& h : log.holds) objs.insert(h.object);
        if (objs.size() < 2) return std::nullopt;
        return m[1] == "first" ? log.holds.front().object : log.holds.back().object;
    }
    if (std::regex_match(q, m, rel)) {
        auto v1 = predicate_from_base(m[1]);
        auto v2 = predicate_from_past(m[3]);
        if (!v1 || !v2) return std::nullopt;
        const Event* anchor = unique_act(log, *v2, m[4]);
        if (!anchor) return std::nullopt;
        return relative_answer(log, *v1, *anchor, m[2] == "after");
    }
    if (std::regex_match(q, m, dur)) {
        const Event *a = nullptr, *b = nullptr;
        for (const auto& h : log.holds) {
            if (h.object == m[1].str()) a = &h;
            if (h.object == m[2].str()) b = &h;
        }
        if (!a || !b) return std::nullopt;
        auto da = duration(*a), db = duration(*b);
        if (!da || !db || *da == *db) return std::nullopt;
        return std::string(*da > *db ? "yes" : "no");
    }
    if (std::regex_match(q, m, exists)) {
        auto v = predicate_from_base(m[1]);
        if (!v) return std::nullopt;
        for (const auto* list : {&log.acts, &log.holds})
            for (const auto& e : *list)
                if (e.verb == *v && e.object == m[2].str()) return std::string("yes");
        return std::string("no");
    }
    if (std::regex_match(q, m, count)) {
        auto v = predicate_from_base(m[1]);
        if (!v) return std::nullopt;
        std::set<std::string> objs;
        for (const auto* list : {&log.acts, &log.holds})
            for (const auto& e : *list)
                if (e.verb == *v) objs.insert(e.object);
        if (objs.empty() || objs.size() > 4) return std::nullopt;
        return std::to_string(objs.size());
    }
    return std::nullopt;
}

DynamicGraph reverse_time(const DynamicGraph& dg) {
    if (dg.empty()) return dg;
    const std::size_t last = dg.frames().back().t;
    std::vector<Frame> out;
    for (auto it = dg.frames().rbegin(); it != dg.frames().rend(); ++it) out.push_back({it->graph, last - it->t});
    return DynamicGraph(std::move(out));
}

std::vector<QASample> shuffle_answers(const std::vector<QASample>& samples, std::uint64_t seed) {
    std::vector<QASample> out = samples;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i].split != Split::test) idx.push_back(i);
    std::vector<std::string> answers;
    for (std::size_t i : idx) answers.push_back(out[i].answer);
    Rng rng(seed);
    std::shuffle(answers.begin(), answers.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]].answer = answers[j];
    return out;
}

} // namespace dygenc::synth
