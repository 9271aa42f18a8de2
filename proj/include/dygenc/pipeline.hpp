#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dygenc/graph_encoder.hpp"
#include "dygenc/json.hpp"
#include "dygenc/nn.hpp"
#include "dygenc/qa_lm.hpp"
#include "dygenc/scene_graph.hpp"
#include "dygenc/seq_encoder.hpp"
#include "dygenc/text_embed.hpp"

namespace dygenc {

struct ModelConfig {
    std::size_t text_dim = 64;
    std::size_t lpe_dim = kDefaultLpeDim;
    std::uint64_t embed_seed = 0x5eed;
    std::size_t graph_dim = 64;      // d_g, also the Q-Former width
    std::size_t graph_layers = 2;
    std::size_t graph_heads = 4;
    TemporalKind temporal = TemporalKind::rope;
    std::size_t k_tokens = 1;
    std::size_t qformer_layers = 2;
    std::size_t qformer_heads = 4;
    std::size_t llm_dim = 128;
    std::size_t llm_layers = 4;
    std::size_t llm_heads = 4;
    std::size_t max_positions = 256;
    LoraConfig lora;
    bool enable_ge = true;   // graph transformer; off pools a linear map of node features
    bool enable_te = true;   // temporal encoding
    bool enable_se = true;   // sequence encoder; off feeds all m projected graph tokens to the LM
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::ordered_json& j);
};

// A dynamic graph with every frame already embedded.
struct PreparedEpisode {
    std::vector<EmbeddedGraph> graphs;
    std::vector<std::size_t> t;
};

struct PreparedSample {
    std::size_t episode;
    std::vector<std::size_t> question_ids;
    std::vector<std::size_t> answer_ids;
    std::string answer;
    std::string template_id;
    Split split;
};

// Samples sharing identical frames point at one PreparedEpisode.
struct PreparedCorpus {
    std::vector<PreparedEpisode> episodes;
    std::vector<PreparedSample> samples;

    std::vector<std::size_t> indices(Split s) const;
};

PreparedCorpus prepare_corpus(const std::vector<QASample>& samples, const Tokenizer& tok, const TextEmbedder& emb,
                              std::size_t lpe_dim);

// Everything the encoder side produced for a batch of episodes.
struct EncodedBatch {
    ad::Var soft;                       // soft-prompt rows, LM width
    std::vector<std::size_t> offsets;   // soft rows of episode i: [offsets[i], offsets[i+1])
};

// Graph encoder → temporal encoding → Q-Former → projector → decoder LM.
class DyGEncModel {
public:
    DyGEncModel(const ModelConfig& cfg, Tokenizer tok);

    const ModelConfig& config() const { return cfg_; }
    const Tokenizer& tokenizer() const { return tok_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    ToyDecoderLM& lm() { return lm_; }
    const ToyDecoderLM& lm() const { return lm_; }

    // Graph tokens (one row per frame) of the episodes, before temporal encoding.
    ad::Var graph_tokens(std::span<const PreparedEpisode* const> episodes) const;
    EncodedBatch encode(std::span<const PreparedEpisode* const> episodes, std::vector<AttentionMap>* maps = nullptr) const;

    // Teacher-forced mean cross-entropy over answer tokens (and the closing
    // <eos>), averaged over the batch. Throws NumericsError when not finite.
    ad::Var loss(const PreparedCorpus& corpus, std::span<const std::size_t> sample_ids, bool train = false,
                 std::uint64_t seed = 0) const;

    std::vector<std::string> predict(const PreparedCorpus& corpus, std::span<const std::size_t> sample_ids,
                                     std::size_t max_len = 16) const;

private:
    ModelConfig cfg_;
    Tokenizer tok_;
    ParameterSet params_;
    GraphEncoder graph_encoder_;
    TemporalEncoder temporal_;
    QFormer qformer_;
    Projector projector_;
    ToyDecoderLM lm_;
};

} // namespace dygenc
