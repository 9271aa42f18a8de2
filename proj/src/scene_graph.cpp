#include "dygenc/scene_graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_set>

#include "dygenc/errors.hpp"
#include "dygenc/json.hpp"

namespace dygenc {

SceneGraph::SceneGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::unordered_set<int> ids;
    for (const auto& n : nodes_) {
        if (!ids.insert(n.id).second) throw SchemaError("duplicate node id " + std::to_string(n.id), 0);
        if (n.label.empty()) throw SchemaError("node " + std::to_string(n.id) + " has an empty label", 0);
    }
    for (const auto& e : edges_) {
        if (!ids.count(e.src) || !ids.count(e.dst))
            throw SchemaError("edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) + " references a missing node", 0);
        if (e.src == e.dst) throw SchemaError("self-loop on node " + std::to_string(e.src), 0);
        if (e.predicate.empty()) throw SchemaError("edge with empty predicate", 0);
    }
}

std::optional<std::size_t> SceneGraph::index_of(int id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return i;
    return std::nullopt;
}

const GraphNode* SceneGraph::node(int id) const {
    auto i = index_of(id);
    return i ? &nodes_[*i] : nullptr;
}

DynamicGraph::DynamicGraph(std::vector<Frame> frames) : frames_(std::move(frames)) {
    for (std::size_t i = 1; i < frames_.size(); ++i)
        if (frames_[i].t <= frames_[i - 1].t)
            throw SchemaError("frame indices must be strictly increasing (" + std::to_string(frames_[i - 1].t) +
                                  " then " + std::to_string(frames_[i].t) + ")",
                              0);
}

std::vector<std::size_t> DynamicGraph::indices() const {
    std::vector<std::size_t> out;
    out.reserve(frames_.size());
    for (const auto& f : frames_) out.push_back(f.t);
    return out;
}

std::vector<SceneGraph> DynamicGraph::graphs() const {
    std::vector<SceneGraph> out;
    out.reserve(frames_.size());
    for (const auto& f : frames_) out.push_back(f.graph);
    return out;
}

const char* to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw SchemaError("unknown split '" + s + "'", 0);
}

// ---- canonical form -------------------------------------------------------------

namespace {

constexpr std::size_t kLeafBudget = 256;

struct Adjacency {
    // (neighbour index, predicate) per node, outgoing and incoming.
    std::vector<std::vector<std::pair<std::size_t, const std::string*>>> out, in;
};

using Signature = std::tuple<std::size_t, std::vector<std::tuple<int, std::string, std::size_t>>>;

std::vector<std::size_t> rank_signatures(const std::vector<Signature>& sigs) {
    std::vector<Signature> sorted = sigs;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> colors(sigs.size());
    for (std::size_t i = 0; i < sigs.size(); ++i)
        colors[i] = std::size_t(std::lower_bound(sorted.begin(), sorted.end(), sigs[i]) - sorted.begin());
    return colors;
}

std::size_t distinct(const std::vector<std::size_t>& c) {
    return std::set<std::size_t>(c.begin(), c.end()).size();
}

std::vector<std::size_t> refine(std::vector<std::size_t> colors, const Adjacency& adj) {
    // Normalise to dense ranks first so equal partitions compare equal.
    {
        std::vector<Signature> sigs;
        for (std::size_t c : colors) sigs.push_back({c, {}});
        colors = rank_signatures(sigs);
    }
    while (true) {
        std::vector<Signature> sigs(colors.size());
        for (std::size_t v = 0; v < colors.size(); ++v) {
            auto& [c, nb] = sigs[v];
            c = colors[v];
            for (auto [u, p] : adj.out[v]) nb.emplace_back(0, *p, colors[u]);
            for (auto [u, p] : adj.in[v]) nb.emplace_back(1, *p, colors[u]);
            std::sort(nb.begin(), nb.end());
        }
        auto next = rank_signatures(sigs);
        if (distinct(next) == distinct(colors)) return next;
        colors = std::move(next);
    }
}

std::string render(const SceneGraph& g, const std::vector<std::size_t>& colors) {
    const std::size_t n = colors.size();
    std::vector<std::size_t> order(n);
    for (std::size_t v = 0; v < n; ++v) order[colors[v]] = v;
    nlohmann::json labels = nlohmann::json::array();
    for (std::size_t r = 0; r < n; ++r) labels.push_back(g.nodes()[order[r]].label);
    std::vector<std::tuple<std::size_t, std::size_t, std::string>> edges;
    for (const auto& e : g.edges())
        edges.emplace_back(colors[*g.index_of(e.src)], colors[*g.index_of(e.dst)], e.predicate);
    std::sort(edges.begin(), edges.end());
    nlohmann::json ej = nlohmann::json::array();
    for (auto& [s, d, p] : edges) ej.push_back({s, d, p});
    return nlohmann::json::array({labels, ej}).dump();
}

void search(const SceneGraph& g, const Adjacency& adj, std::vector<std::size_t> colors, std::size_t& leaves,
            std::optional<std::string>& best) {
    colors = refine(std::move(colors), adj);
    const std::size_t n = colors.size();
    if (distinct(colors) == n) {
        ++leaves;
        std::string s = render(g, colors);
        if (!best || s < *best) best = std::move(s);
        return;
    }
    std::vector<std::size_t> count(n, 0);
    for (std::size_t c : colors) ++count[c];
    std::size_t cell = 0;
    while (count[cell] < 2) ++cell;
    for (std::size_t v = 0; v < n; ++v) {
        if (colors[v] != cell) continue;
        if (best && leaves >= kLeafBudget) return;
        std::vector<std::size_t> next(n);
        for (std::size_t u = 0; u < n; ++u) next[u] = 2 * colors[u] + ((colors[u] == cell && u != v) ? 1 : 0);
        search(g, adj, std::move(next), leaves, best);
    }
}

} // namespace

std::string canonical_form(const SceneGraph& g) {
    if (g.empty()) return "∅";
    const std::size_t n = g.nodes().size();
    Adjacency adj;
    adj.out.resize(n);
    adj.in.resize(n);
    for (const auto& e : g.edges()) {
        const std::size_t s = *g.index_of(e.src), d = *g.index_of(e.dst);
        adj.out[s].emplace_back(d, &e.predicate);
        adj.in[d].emplace_back(s, &e.predicate);
    }
    std::vector<std::string> labels;
    for (const auto& nd : g.nodes()) labels.push_back(nd.label);
    std::vector<std::string> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> colors(n);
    for (std::size_t v = 0; v < n; ++v)
        colors[v] = std::size_t(std::lower_bound(sorted.begin(), sorted.end(), labels[v]) - sorted.begin());
    std::size_t leaves = 0;
    std::optional<std::string> best;
    search(g, adj, std::move(colors), leaves, best);
    return *best;
}

DynamicGraph compact(const std::vector<SceneGraph>& frames, CompactMode mode, const std::vector<std::size_t>& indices) {
    if (frames.empty()) throw EmptySequence("compact: empty frame sequence");
    if (!indices.empty() && indices.size() != frames.size())
        throw ShapeError("compact: " + std::to_string(indices.size()) + " indices for " + std::to_string(frames.size()) + " frames");
    std::vector<Frame> kept;
    std::string previous;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        std::string key = canonical_form(frames[i]);
        const bool drop = mode == CompactMode::consecutive ? (!kept.empty() && key == previous) : seen.count(key) > 0;
        if (!drop) kept.push_back({frames[i], indices.empty() ? i : indices[i]});
        if (mode == CompactMode::global) seen.insert(key);
        previous = std::move(key);
    }
    return DynamicGraph(std::move(kept));
}

// ---- JSONL ----------------------------------------------------------------------

namespace {

template <typename T>
T field(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'", line);
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("field '") + key + "' has the wrong type", line);
    }
}

} // namespace

std::string to_jsonl_line(const QASample& s) {
    nlohmann::ordered_json j;
    auto& frames = j["frames"] = nlohmann::ordered_json::array();
    for (const auto& f : s.dg.frames()) {
        nlohmann::ordered_json fj;
        fj["t"] = f.t;
        auto& nodes = fj["nodes"] = nlohmann::ordered_json::array();
        for (const auto& n : f.graph.nodes()) nodes.push_back({n.id, n.label});
        auto& edges = fj["edges"] = nlohmann::ordered_json::array();
        for (const auto& e : f.graph.edges()) edges.push_back({e.src, e.dst, e.predicate});
        frames.push_back(std::move(fj));
    }
    j["question"] = s.question;
    j["answer"] = s.answer;
    j["template_id"] = s.template_id;
    j["split"] = to_string(s.split);
    return j.dump();
}

QASample parse_jsonl_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw SchemaError("expected a JSON object", line_no);
    QASample s;
    s.question = field<std::string>(j, "question", line_no);
    s.answer = field<std::string>(j, "answer", line_no);
    s.template_id = field<std::string>(j, "template_id", line_no);
    if (s.question.empty()) throw SchemaError("empty question", line_no);
    if (s.answer.empty()) throw SchemaError("empty answer", line_no);
    try {
        s.split = split_from_string(field<std::string>(j, "split", line_no));
    } catch (const SchemaError& e) {
        if (e.line() == 0) throw SchemaError(e.detail(), line_no);
        throw;
    }
    auto frames_json = field<nlohmann::json>(j, "frames", line_no);
    if (!frames_json.is_array()) throw SchemaError("field 'frames' must be an array", line_no);
    std::vector<Frame> frames;
    try {
        for (std::size_t i = 0; i < frames_json.size(); ++i) {
            const auto& fj = frames_json[i];
            std::vector<GraphNode> nodes;
            for (const auto& n : field<nlohmann::json>(fj, "nodes", line_no)) {
                if (!n.is_array() || n.size() != 2 || !n[0].is_number_integer() || !n[1].is_string())
                    throw SchemaError("node entries must be [id, label]", line_no);
                nodes.push_back({n[0].get<int>(), n[1].get<std::string>()});
            }
            std::vector<GraphEdge> edges;
            for (const auto& e : field<nlohmann::json>(fj, "edges", line_no)) {
                if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
                    !e[2].is_string())
                    throw SchemaError("edge entries must be [src, dst, predicate]", line_no);
                edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<std::string>()});
            }
            std::size_t t = fj.contains("t") ? field<std::size_t>(fj, "t", line_no) : i;
            frames.push_back({SceneGraph(std::move(nodes), std::move(edges)), t});
        }
        s.dg = DynamicGraph(std::move(frames));
    } catch (const SchemaError& e) {
        if (e.line() == 0) throw SchemaError(e.detail(), line_no);
        throw;
    }
    return s;
}

std::vector<QASample> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<QASample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_jsonl_line(line, line_no));
    }
    return out;
}

void save_jsonl(const std::vector<QASample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& s : samples) out << to_jsonl_line(s) << '\n';
}

} // namespace dygenc
