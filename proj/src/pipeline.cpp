#include "dygenc/pipeline.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

#include "dygenc/errors.hpp"

namespace dygenc {

nlohmann::ordered_json ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["text_dim"] = text_dim;
    j["lpe_dim"] = lpe_dim;
    j["embed_seed"] = embed_seed;
    j["graph_dim"] = graph_dim;
    j["graph_layers"] = graph_layers;
    j["graph_heads"] = graph_heads;
    j["temporal"] = to_string(temporal);
    j["k_tokens"] = k_tokens;
    j["qformer_layers"] = qformer_layers;
    j["qformer_heads"] = qformer_heads;
    j["llm_dim"] = llm_dim;
    j["llm_layers"] = llm_layers;
    j["llm_heads"] = llm_heads;
    j["max_positions"] = max_positions;
    j["lora_rank"] = lora.rank;
    j["lora_alpha"] = lora.alpha;
    j["lora_dropout"] = lora.dropout;
    j["enable_ge"] = enable_ge;
    j["enable_te"] = enable_te;
    j["enable_se"] = enable_se;
    j["seed"] = seed;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    try {
        c.text_dim = j.at("text_dim");
        c.lpe_dim = j.at("lpe_dim");
        c.embed_seed = j.at("embed_seed");
        c.graph_dim = j.at("graph_dim");
        c.graph_layers = j.at("graph_layers");
        c.graph_heads = j.at("graph_heads");
        c.temporal = temporal_kind_from_string(j.at("temporal").get<std::string>());
        c.k_tokens = j.at("k_tokens");
        c.qformer_layers = j.at("qformer_layers");
        c.qformer_heads = j.at("qformer_heads");
        c.llm_dim = j.at("llm_dim");
        c.llm_layers = j.at("llm_layers");
        c.llm_heads = j.at("llm_heads");
        c.max_positions = j.at("max_positions");
        c.lora.rank = j.at("lora_rank");
        c.lora.alpha = j.at("lora_alpha");
        c.lora.dropout = j.at("lora_dropout");
        c.enable_ge = j.at("enable_ge");
        c.enable_te = j.at("enable_te");
        c.enable_se = j.at("enable_se");
        c.seed = j.at("seed");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    return c;
}

std::vector<std::size_t> PreparedCorpus::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == s) out.push_back(i);
    return out;
}

namespace {

std::string frames_key(const DynamicGraph& dg) {
    std::string key;
    for (const auto& f : dg.frames()) {
        key += std::to_string(f.t) + '|';
        for (const auto& n : f.graph.nodes()) key += std::to_string(n.id) + ':' + n.label + ';';
        key += '|';
        for (const auto& e : f.graph.edges())
            key += std::to_string(e.src) + '>' + std::to_string(e.dst) + ':' + e.predicate + ';';
        key += '\n';
    }
    return key;
}

} // namespace

PreparedCorpus prepare_corpus(const std::vector<QASample>& samples, const Tokenizer& tok, const TextEmbedder& emb,
                              std::size_t lpe_dim) {
    PreparedCorpus out;
    EmbeddingCache cache(emb);
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& s : samples) {
        if (s.dg.empty()) throw EmptySequence("sample with no frames: '" + s.question + "'");
        const std::string key = frames_key(s.dg);
        auto it = seen.find(key);
        if (it == seen.end()) {
            PreparedEpisode ep;
            for (const auto& f : s.dg.frames()) {
                ep.graphs.push_back(embed_graph(f.graph, cache, lpe_dim));
                ep.t.push_back(f.t);
            }
            it = seen.emplace(key, out.episodes.size()).first;
            out.episodes.push_back(std::move(ep));
        }
        PreparedSample p{it->second, tok.encode(s.question), tok.encode(s.answer), s.answer, s.template_id, s.split};
        out.samples.push_back(std::move(p));
    }
    return out;
}

namespace {

GraphEncoderConfig graph_config(const ModelConfig& c) {
    GraphEncoderConfig g;
    g.input_dim = c.text_dim + c.lpe_dim;
    g.edge_dim = c.text_dim;
    g.hidden_dim = c.graph_dim;
    g.num_layers = c.graph_layers;
    g.num_heads = c.graph_heads;
    return g;
}

QFormerConfig qformer_config(const ModelConfig& c) {
    QFormerConfig q;
    q.dim = c.graph_dim;
    q.num_queries = c.k_tokens;
    q.num_layers = c.qformer_layers;
    q.num_heads = c.qformer_heads;
    return q;
}

DecoderConfig decoder_config(const ModelConfig& c, std::size_t vocab) {
    DecoderConfig d;
    d.vocab_size = vocab;
    d.dim = c.llm_dim;
    d.num_layers = c.llm_layers;
    d.num_heads = c.llm_heads;
    d.max_positions = c.max_positions;
    d.lora = c.lora;
    return d;
}

const ModelConfig& checked(const ModelConfig& c) {
    if (c.k_tokens == 0) throw ConfigError("k_tokens must be at least 1");
    return c;
}

} // namespace

DyGEncModel::DyGEncModel(const ModelConfig& cfg, Tokenizer tok)
    : cfg_(checked(cfg)),
      tok_(std::move(tok)),
      params_(cfg.seed),
      graph_encoder_(params_, graph_config(cfg)),
      temporal_(params_, cfg.graph_dim, cfg.temporal),
      qformer_(params_, qformer_config(cfg)),
      projector_(params_, cfg.graph_dim, cfg.llm_dim),
      lm_(params_, decoder_config(cfg, tok_.size())) {}

ad::Var DyGEncModel::graph_tokens(std::span<const PreparedEpisode* const> episodes) const {
    GraphBatch batch;
    for (const auto* ep : episodes)
        for (const auto& g : ep->graphs) batch.append(g);
    return cfg_.enable_ge ? graph_encoder_.encode(batch) : graph_encoder_.encode_without_message_passing(batch);
}

EncodedBatch DyGEncModel::encode(std::span<const PreparedEpisode* const> episodes, std::vector<AttentionMap>* maps) const {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> t;
    for (const auto* ep : episodes) {
        if (ep->graphs.empty()) throw EmptySequence("episode with no frames");
        offsets.push_back(offsets.back() + ep->graphs.size());
        t.insert(t.end(), ep->t.begin(), ep->t.end());
    }
    ad::Var tokens = graph_tokens(episodes);
    if (cfg_.enable_te) tokens = temporal_.apply(tokens, t);
    EncodedBatch out;
    if (cfg_.enable_se) {
        tokens = qformer_.compress(tokens, offsets, maps);
        for (std::size_t i = 0; i <= episodes.size(); ++i) out.offsets.push_back(i * cfg_.k_tokens);
    } else {
        out.offsets = offsets;
    }
    out.soft = projector_(tokens);
    return out;
}

namespace {

// Unique episodes of a sample list, in first-seen order, and each sample's slot in that list.
struct EpisodeIndex {
    std::vector<const PreparedEpisode*> episodes;
    std::vector<std::size_t> slot;
};

EpisodeIndex index_episodes(const PreparedCorpus& corpus, std::span<const std::size_t> sample_ids) {
    EpisodeIndex idx;
    std::map<std::size_t, std::size_t> where;
    for (std::size_t id : sample_ids) {
        const std::size_t ep = corpus.samples.at(id).episode;
        auto [it, fresh] = where.emplace(ep, idx.episodes.size());
        if (fresh) idx.episodes.push_back(&corpus.episodes.at(ep));
        idx.slot.push_back(it->second);
    }
    return idx;
}

} // namespace

ad::Var DyGEncModel::loss(const PreparedCorpus& corpus, std::span<const std::size_t> sample_ids, bool train,
                          std::uint64_t seed) const {
    if (sample_ids.empty()) throw ConfigError("loss over an empty batch");
    const EpisodeIndex idx = index_episodes(corpus, sample_ids);
    const EncodedBatch enc = encode(idx.episodes);

    std::vector<std::vector<Slot>> seqs;
    std::vector<std::size_t> lengths, target_rows, targets;
    std::vector<real> weights;
    std::size_t row = 0;
    const real batch = real(sample_ids.size());
    for (std::size_t b = 0; b < sample_ids.size(); ++b) {
        const PreparedSample& s = corpus.samples[sample_ids[b]];
        const std::size_t e = idx.slot[b];
        auto slots = prompt_slots(tok_, enc.offsets[e], enc.offsets[e + 1] - enc.offsets[e], s.question_ids);
        const std::size_t prompt_len = slots.size();
        for (std::size_t id : s.answer_ids) slots.push_back({false, id});
        const std::size_t n_targets = s.answer_ids.size() + 1;
        for (std::size_t j = 0; j < n_targets; ++j) {
            target_rows.push_back(row + prompt_len - 1 + j);
            targets.push_back(j < s.answer_ids.size() ? s.answer_ids[j] : std::size_t(Tokenizer::eos));
            weights.push_back(real(1) / (real(n_targets) * batch));
        }
        row += slots.size();
        lengths.push_back(slots.size());
        seqs.push_back(std::move(slots));
    }
    ad::Var hidden = lm_.forward(embed_slots(lm_, seqs, enc.soft), lengths, train, seed);
    ad::Var logits = lm_.logits(ad::gather_rows(hidden, target_rows));
    ad::Var l = ad::cross_entropy(logits, targets, weights);
    if (!std::isfinite(double(l.value().item()))) throw NumericsError("loss is not finite");
    return l;
}

std::vector<std::string> DyGEncModel::predict(const PreparedCorpus& corpus, std::span<const std::size_t> sample_ids,
                                              std::size_t max_len) const {
    if (sample_ids.empty()) return {};
    ad::NoGradGuard guard;
    const EpisodeIndex idx = index_episodes(corpus, sample_ids);
    const EncodedBatch enc = encode(idx.episodes);
    std::vector<std::vector<Slot>> prompts;
    for (std::size_t b = 0; b < sample_ids.size(); ++b) {
        const std::size_t e = idx.slot[b];
        prompts.push_back(prompt_slots(tok_, enc.offsets[e], enc.offsets[e + 1] - enc.offsets[e],
                                       corpus.samples[sample_ids[b]].question_ids));
    }
    const auto ids = greedy_decode(lm_, tok_, prompts, enc.soft, max_len);
    std::vector<std::string> out;
    for (const auto& seq : ids) out.push_back(tok_.decode(seq));
    return out;
}

} // namespace dygenc
