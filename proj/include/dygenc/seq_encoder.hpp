#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dygenc/autodiff.hpp"
#include "dygenc/nn.hpp"

namespace dygenc {

enum class TemporalKind { te, ape, rope };
const char* to_string(TemporalKind k);
TemporalKind temporal_kind_from_string(const std::string& s);

inline constexpr double kRopeBase = 10000.0;

// Fixed sinusoid rows: row r, column 2j = sin(t_r·ω_j), 2j+1 = cos(t_r·ω_j),
// ω_j = 10000^(−2j/dim).
Tensor sinusoid_table(std::span<const std::size_t> t, std::size_t dim);

// Rotates feature pairs (2j, 2j+1) of row r by angle t_r·base^(−2j/dim).
ad::Var rope_rotate(const ad::Var& x, std::span<const std::size_t> t, double base = kRopeBase);

// cos(t_r·ω + φ) per row, with learnable ω and φ of length dim.
ad::Var temporal_cosine(std::span<const std::size_t> t, const ad::Var& omega, const ad::Var& phi);

// Injects original frame indices into graph tokens. TE and APE add a
// position vector; RoPE rotates the tokens.
class TemporalEncoder {
public:
    TemporalEncoder(ParameterSet& params, std::size_t dim, TemporalKind kind, const std::string& prefix = "temporal");

    TemporalKind kind() const { return kind_; }
    ad::Var apply(const ad::Var& tokens, std::span<const std::size_t> t) const;

private:
    std::size_t dim_;
    TemporalKind kind_;
    ad::Var omega_, phi_;
};

struct QFormerConfig {
    std::size_t dim = 64;
    std::size_t num_queries = 1;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t ffn_mult = 4;
};

// Cross-attention weights of one head in one layer for one sequence: k × m.
struct AttentionMap {
    std::size_t sequence;
    std::size_t layer;
    std::size_t head;
    Tensor weights;
};

// Intermediate values kept for inspection: per layer, the cross-attention
// context before the output projection and the value-projected inputs.
struct QFormerTrace {
    std::vector<Tensor> cross_context;
    std::vector<Tensor> cross_values;
};

// Learnable query tokens that read a variable-length token sequence through
// pre-norm blocks of (query self-attention, cross-attention, feed-forward).
// The output has num_queries rows per sequence whatever its length.
class QFormer {
public:
    QFormer(ParameterSet& params, const QFormerConfig& cfg, const std::string& prefix = "qformer");

    const QFormerConfig& config() const { return cfg_; }

    // tokens stacks every sequence's rows; sequence s owns rows
    // [offsets[s], offsets[s+1]). Returns num_queries rows per sequence.
    ad::Var compress(const ad::Var& tokens, std::span<const std::size_t> offsets,
                     std::vector<AttentionMap>* maps = nullptr, QFormerTrace* trace = nullptr) const;

private:
    struct Attention {
        Linear q, k, v, o;
    };
    struct Layer {
        LayerNorm norm_self;
        Attention self;
        LayerNorm norm_cross, norm_memory;
        Attention cross;
        LayerNorm norm_ffn;
        Linear fc1, fc2;
    };

    QFormerConfig cfg_;
    ad::Var queries_;
    std::vector<Layer> layers_;
    LayerNorm final_norm_;
};

// CSV with header layer,head,query_index,frame_index,weight.
void write_attention_csv(std::ostream& out, const std::vector<AttentionMap>& maps);

} // namespace dygenc
