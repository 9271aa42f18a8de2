#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dygenc/scene_graph.hpp"

namespace dygenc::synth {

struct ObjectSpec {
    std::string label;
    bool portable = false;   // can be picked up, put down, thrown
    bool openable = false;
    bool sittable = false;
    bool surface = false;    // things can be put on it
    bool container = false;  // things can start inside it (needs to be open to take them out)
};

// Momentary actions; "holds" is the persistent state between a pick-up and
// the following put-down or throw.
inline const std::vector<std::string> kActions = {"picks_up", "puts_down", "opens",   "closes",
                                                  "sits_on",  "throws",    "looks_at"};
inline constexpr const char* kHolds = "holds";
inline const std::vector<std::string> kSpatial = {"on", "near", "inside"};

struct WorldSpec {
    std::vector<ObjectSpec> objects;
    std::size_t objects_min = 6;   // sampled per episode, besides the person and the floor
    std::size_t objects_max = 9;
    std::size_t actions_min = 4;
    std::size_t actions_max = 7;
    // Target compacted length ~ Gamma(shape, scale), at least min_length.
    double length_shape = 3.5;
    double length_scale = 6.3;
    std::size_t min_length = 4;
    std::size_t max_persist = 4;   // raw frames a state lasts: 1..max_persist
    std::size_t min_questions = 3;
    std::size_t max_questions = 6;
    bool global_dedup = false;     // compact against every earlier frame, not only the previous one

    static WorldSpec defaults();
};

// "key = value" text over the numeric WorldSpec fields; the object vocabulary
// stays at its defaults.
void set_world_value(WorldSpec& spec, const std::string& key, const std::string& value);
WorldSpec parse_world_spec(const std::string& text, const std::string& origin = "<world>");

// One contiguous occurrence of an action edge from the person, measured on the
// frames of a (compacted) episode.
struct Event {
    std::string verb;
    std::string object;
    std::size_t first_frame;  // frame positions [first_frame, last_frame]
    std::size_t last_frame;
    std::size_t t_begin;      // original index of the first frame
    std::size_t t_end;        // original index of the next frame; nullopt-like max() when the run ends the episode
};

inline constexpr std::size_t kOpenEnd = static_cast<std::size_t>(-1);

// Momentary actions and hold spans, in frame order.
struct EventLog {
    std::vector<Event> acts;
    std::vector<Event> holds;
};

EventLog extract_events(const DynamicGraph& dg);

struct Episode {
    DynamicGraph dg;           // compacted
    std::size_t raw_frames = 0;
};

Episode simulate_episode(const WorldSpec& spec, std::uint64_t seed);

inline const std::vector<std::string> kTemplates = {"AFTER",    "BEFORE",           "WHAT-HELD-FIRST", "WHAT-HELD-LAST",
                                                    "EXISTS",   "DURATION-COMPARE", "COUNT-DISTINCT"};

// Between min_questions and max_questions distinct questions whose templates
// are satisfiable on the episode; fewer when not enough are.
std::vector<QASample> make_questions(const DynamicGraph& dg, const WorldSpec& spec, std::uint64_t seed, Split split);

// Deterministic corpus; episodes are split 80/10/10 into train/val/test.
std::vector<QASample> generate_corpus(const WorldSpec& spec, std::size_t n_episodes, std::uint64_t seed);

// Recomputes the answer of a generated question from its frames; nullopt when
// the question does not parse or its preconditions no longer hold.
std::optional<std::string> reanswer(const QASample& sample);

// Frames in reverse order with t mirrored (t' = t_last − t), so gaps between
// frames are preserved.
DynamicGraph reverse_time(const DynamicGraph& dg);

// Shuffle control: answers permuted across the train and val samples; test
// samples are unchanged.
std::vector<QASample> shuffle_answers(const std::vector<QASample>& samples, std::uint64_t seed);

// Verb phrases used in questions.
std::string verb_base(const std::string& predicate);
std::string verb_past(const std::string& predicate);

} // namespace dygenc::synth
