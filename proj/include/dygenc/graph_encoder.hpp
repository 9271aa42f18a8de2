#pragma once

#include <span>
#include <string>
#include <vector>

#include "dygenc/autodiff.hpp"
#include "dygenc/nn.hpp"
#include "dygenc/scene_graph.hpp"
#include "dygenc/text_embed.hpp"

namespace dygenc {

struct GraphEncoderConfig {
    std::size_t input_dim = 68;  // text dim + d_lpe
    std::size_t edge_dim = 64;
    std::size_t hidden_dim = 64;  // also the output width d_g
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
};

// Many small graphs stacked into one disjoint union.
struct GraphBatch {
    std::vector<real> node_data;         // ΣV × node_width, row-major
    std::vector<real> edge_data;         // ΣE × edge_width
    std::size_t node_width = 0;
    std::size_t edge_width = 0;
    std::vector<std::size_t> src, dst;   // global node rows
    std::vector<std::size_t> offsets{0}; // node row range per graph

    void append(const EmbeddedGraph& g);
    std::size_t num_graphs() const { return offsets.size() - 1; }
    Tensor nodes() const { return Tensor({offsets.back(), node_width}, node_data); }
    Tensor edges() const { return Tensor({src.size(), edge_width}, edge_data); }
};

// Edge-aware graph transformer followed by mean pooling.
//
// Per layer, node i attends over its incoming edges j→i and itself:
//   key_ij = W_k x_j + W_e e_ij, value_ij = W_v x_j + W_e e_ij,
//   key_ii = W_k x_i,            value_ii = W_v x_i,
// then h_i = LayerNorm(W_r x_i + attention_i) with GELU between layers.
// The graph token is the mean of the final node states.
class GraphEncoder {
public:
    GraphEncoder(ParameterSet& params, const GraphEncoderConfig& cfg, const std::string& prefix = "graph_encoder");

    const GraphEncoderConfig& config() const { return cfg_; }

    // One row of width hidden_dim per graph in the batch. Throws
    // EmptyGraphError if any graph has no nodes.
    ad::Var encode(const GraphBatch& batch) const;
    // Same pooling over a single linear projection of the node features, with
    // no message passing (the "graph encoder off" ablation).
    ad::Var encode_without_message_passing(const GraphBatch& batch) const;

    ad::Var encode_graph(const EmbeddedGraph& g) const;

private:
    struct Layer {
        Linear query, key, value, edge, root;
        LayerNorm norm;
    };

    GraphEncoderConfig cfg_;
    std::vector<Layer> layers_;
    Linear bypass_;
};

} // namespace dygenc
