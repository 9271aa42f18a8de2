#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dygenc/scene_graph.hpp"
#include "dygenc/tensor.hpp"
#include "dygenc/text_embed.hpp"

namespace dygenc {

// Undirected skeleton with node prizes and positive edge costs.
struct PrizedGraph {
    std::vector<real> prizes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<real> costs;

    std::size_t num_nodes() const { return prizes.size(); }
    std::size_t num_edges() const { return edges.size(); }
    void validate() const;
};

struct PcstSolution {
    std::vector<std::size_t> nodes;  // ascending
    std::vector<std::size_t> edges;  // indices into PrizedGraph::edges, ascending
    real objective = 0;              // prizes of nodes minus costs of edges
};

// Hashed embeddings collide often at 64 buckets, which scrambles the ranking
// of unrelated labels; the retrieval pass uses a wider table than the encoder.
inline constexpr std::size_t kRetrievalEmbedDim = 1024;

struct RetrievalOptions {
    std::size_t top_n = 4;
    real edge_cost = real(0.5);
    real min_cost = real(0.05);
    std::size_t exact_limit = 15;   // exact search up to this many edges
};

// Node prizes top_n..1 by descending cosine similarity of label to query (ties
// by node id); edge cost edge_cost − max(0, similarity of predicate), floored
// at min_cost.
PrizedGraph assign_prizes(const SceneGraph& g, const std::string& query, const TextEmbedder& emb,
                          const RetrievalOptions& opt = {});

real pcst_objective(const PrizedGraph& pg, const std::vector<std::size_t>& nodes, const std::vector<std::size_t>& edges);
// True when the edges form one tree spanning exactly `nodes` (a lone node or
// the empty selection count as trees).
bool is_tree(const PrizedGraph& pg, const std::vector<std::size_t>& nodes, const std::vector<std::size_t>& edges);

// Best tree by enumeration of every edge subset; empty when nothing scores above 0.
PcstSolution pcst_exact(const PrizedGraph& pg);
// Moat growth in the manner of Goemans–Williamson, then the best subtree of
// the resulting forest by dynamic programming.
PcstSolution pcst_approx(const PrizedGraph& pg);
// Exact when the graph has at most exact_limit edges, approximate otherwise.
PcstSolution pcst_solve(const PrizedGraph& pg, std::size_t exact_limit = 15);

// Objective of the solved subtree of each frame.
std::vector<real> score_frames(const DynamicGraph& dg, const std::string& query, const TextEmbedder& emb,
                               const RetrievalOptions& opt = {});
// The `budget` best-scoring frames (earlier frames win ties), in original order.
DynamicGraph retrieve_frames(const DynamicGraph& dg, const std::string& query, std::size_t budget,
                             const TextEmbedder& emb, const RetrievalOptions& opt = {});

} // namespace dygenc
