#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dygenc/autodiff.hpp"
#include "dygenc/nn.hpp"

namespace dygenc {

// Lowercase, punctuation split off as separate tokens, whitespace collapsed.
std::string normalize_text(const std::string& text);
std::vector<std::string> split_words(const std::string& text);

// Closed word-level vocabulary. Ids 0..5 are the special tokens.
class Tokenizer {
public:
    static constexpr std::size_t pad = 0, unk = 1, bos = 2, eos = 3, graph_open = 4, graph_close = 5;
    static constexpr std::size_t num_specials = 6;

    Tokenizer();
    // Specials, the prompt words, then every word of texts in sorted order.
    static Tokenizer build(const std::vector<std::string>& texts);
    static Tokenizer from_vocab(const std::vector<std::string>& vocab);

    std::vector<std::size_t> encode(const std::string& text) const;
    // Space-joined words; special tokens are skipped.
    std::string decode(std::span<const std::size_t> ids) const;

    std::size_t size() const { return vocab_.size(); }
    const std::string& token(std::size_t id) const { return vocab_.at(id); }
    std::optional<std::size_t> id(const std::string& word) const;
    bool is_special(std::size_t id) const { return id < num_specials; }
    const std::vector<std::string>& vocab() const { return vocab_; }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Literal prompt words around the soft prompt.
inline constexpr const char* kPromptPrefix = "based on scene graph ,";
inline constexpr const char* kPromptSeparator = ",";

// Two-layer MLP from graph-token width to the language model width.
class Projector {
public:
    Projector(ParameterSet& params, std::size_t in_dim, std::size_t out_dim, const std::string& prefix = "projector");
    ad::Var operator()(const ad::Var& x) const { return fc2_(ad::gelu(fc1_(x))); }

private:
    Linear fc1_, fc2_;
};

struct LoraConfig {
    std::size_t rank = 8;
    double alpha = 16;
    double dropout = 0.05;
};

struct DecoderConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 128;
    std::size_t num_layers = 4;
    std::size_t num_heads = 4;
    std::size_t ffn_mult = 4;
    std::size_t max_positions = 256;
    LoraConfig lora;
};

// Low-rank additive delta on a frozen projection: x·Aᵀ·Bᵀ·(alpha/rank), with
// A: rank×in and B: out×rank. B starts at zero so the delta starts at zero.
struct LoraAdapter {
    ad::Var a;
    ad::Var b;
    double scaling = 0;
    double dropout = 0;

    ad::Var delta(const ad::Var& x, bool train, std::uint64_t seed) const;
};

// Small pre-norm causal transformer with learned positions and an output head
// tied to the token embeddings. LoRA adapters sit on the query and value
// projections and are applied only while enabled.
class ToyDecoderLM {
public:
    ToyDecoderLM(ParameterSet& params, const DecoderConfig& cfg, const std::string& prefix = "lm");

    const DecoderConfig& config() const { return cfg_; }
    void set_lora_enabled(bool on) { lora_enabled_ = on; }
    bool lora_enabled() const { return lora_enabled_; }

    ad::Var embed_tokens(std::span<const std::size_t> ids) const;
    // inputs: sequences of the given lengths stacked row-wise (already
    // embedded, no positions). Returns the final-normed hidden states.
    ad::Var forward(const ad::Var& inputs, std::span<const std::size_t> lengths, bool train = false,
                    std::uint64_t seed = 0) const;
    ad::Var logits(const ad::Var& hidden) const;

private:
    struct Block {
        LayerNorm norm_attn;
        Linear q, k, v, o;
        LoraAdapter lora_q, lora_v;
        LayerNorm norm_ffn;
        Linear fc1, fc2;
    };

    DecoderConfig cfg_;
    ad::Var token_embedding_;
    ad::Var position_embedding_;
    std::vector<Block> blocks_;
    LayerNorm final_norm_;
    bool lora_enabled_ = false;
};

// Where each input row comes from: a vocabulary token or a soft-prompt row.
struct Slot {
    bool soft;
    std::size_t index;
};

// Layout of one prompt: <bos> prefix <graph> soft… </graph> , question.
std::vector<Slot> prompt_slots(const Tokenizer& tok, std::size_t soft_begin, std::size_t soft_count,
                               std::span<const std::size_t> question_ids);

// Embeds a batch of slot sequences: token slots through the embedding table,
// soft slots from rows of `soft` (which may be empty when no slot is soft).
ad::Var embed_slots(const ToyDecoderLM& lm, const std::vector<std::vector<Slot>>& sequences, const ad::Var& soft);

// Embedded prompt for one question with soft prompt rows h_llm (k × d_llm).
ad::Var assemble_prompt(const ToyDecoderLM& lm, const Tokenizer& tok, const ad::Var& h_llm, const std::string& question);

// Greedy decoding of every prompt until <eos> or max_len tokens. Special
// tokens other than <eos> are never emitted.
std::vector<std::vector<std::size_t>> greedy_decode(const ToyDecoderLM& lm, const Tokenizer& tok,
                                                    const std::vector<std::vector<Slot>>& prompts, const ad::Var& soft,
                                                    std::size_t max_len = 16);

// Lowercased, trimmed, whitespace-collapsed.
std::string normalize_answer(const std::string& s);
// True iff the normalized gold answer contains the normalized prediction.
bool answer_matches(const std::string& pred, const std::string& gold);

} // namespace dygenc
