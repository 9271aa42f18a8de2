#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dygenc {

struct GraphNode {
    int id;
    std::string label;
    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    int src;
    int dst;
    std::string predicate;
    bool operator==(const GraphEdge&) const = default;
};

// One frame: objects and directed, typed relations. Immutable once built.
class SceneGraph {
public:
    SceneGraph() = default;
    // Throws SchemaError(line 0) on duplicate ids, dangling endpoints, empty
    // text or self-loops.
    SceneGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges);

    const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }
    const std::vector<GraphEdge>& edges() const noexcept { return edges_; }
    bool empty() const noexcept { return nodes_.empty(); }
    // Row index of a node id; nullopt when absent.
    std::optional<std::size_t> index_of(int id) const;
    const GraphNode* node(int id) const;

    bool operator==(const SceneGraph&) const = default;

private:
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
};

struct Frame {
    SceneGraph graph;
    std::size_t t;  // index of the frame in the original, uncompacted sequence
    bool operator==(const Frame&) const = default;
};

// Time-ordered frames with strictly increasing original indices.
class DynamicGraph {
public:
    DynamicGraph() = default;
    explicit DynamicGraph(std::vector<Frame> frames);

    const std::vector<Frame>& frames() const noexcept { return frames_; }
    std::size_t size() const noexcept { return frames_.size(); }
    bool empty() const noexcept { return frames_.empty(); }
    const Frame& operator[](std::size_t i) const { return frames_[i]; }
    std::vector<std::size_t> indices() const;
    std::vector<SceneGraph> graphs() const;

    bool operator==(const DynamicGraph&) const = default;

private:
    std::vector<Frame> frames_;
};

enum class Split { train, val, test };
const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct QASample {
    DynamicGraph dg;
    std::string question;
    std::string answer;
    std::string template_id;
    Split split = Split::train;
    bool operator==(const QASample&) const = default;
};

// Label-aware canonical string: equal for graphs that differ only by a node-id
// relabeling. Colour refinement on (label, typed incident edges) followed by
// individualisation over the remaining ties; the search is capped, beyond
// which the first explored labelling is used. The empty graph maps to "∅".
std::string canonical_form(const SceneGraph& g);

enum class CompactMode { consecutive, global };

// Drops frames whose canonical form repeats the previous kept frame
// (consecutive) or any earlier kept frame (global). Kept frames carry the
// original index of the first frame of their run. `indices` defaults to
// 0..n-1. Throws EmptySequence on empty input.
DynamicGraph compact(const std::vector<SceneGraph>& frames, CompactMode mode = CompactMode::consecutive,
                     const std::vector<std::size_t>& indices = {});

// JSONL corpus I/O. One sample per line:
//   {"frames":[{"t":0,"nodes":[[id,"label"],...],"edges":[[src,dst,"pred"],...]},...],
//    "question":"...","answer":"...","template_id":"...","split":"train|val|test"}
// A frame without "t" takes its position in the list.
std::vector<QASample> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::vector<QASample>& samples, const std::filesystem::path& path);
std::string to_jsonl_line(const QASample& s);
QASample parse_jsonl_line(const std::string& line, std::size_t line_no);

} // namespace dygenc
