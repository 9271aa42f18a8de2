#include "dygenc/qa_lm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "dygenc/errors.hpp"
#include "dygenc/log.hpp"
#include "dygenc/rng.hpp"

namespace dygenc {

namespace {

const std::vector<std::string> kSpecials = {"<pad>", "<unk>", "<bos>", "<eos>", "<graph>", "</graph>"};

bool is_punct(char c) { return c == ',' || c == '.' || c == '?' || c == '!' || c == ';' || c == ':'; }

} // namespace

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (is_punct(ch)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(char(std::tolower(c)));
        }
    }
    flush();
    return out;
}

std::string normalize_text(const std::string& text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

Tokenizer::Tokenizer() {
    for (const auto& s : kSpecials) {
        index_.emplace(s, vocab_.size());
        vocab_.push_back(s);
    }
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts) {
    Tokenizer tok;
    std::set<std::string> words;
    for (const auto& w : split_words(kPromptPrefix)) words.insert(w);
    for (const auto& w : split_words(kPromptSeparator)) words.insert(w);
    for (const auto& t : texts)
        for (auto& w : split_words(t)) words.insert(std::move(w));
    for (const auto& w : words)
        if (!tok.index_.count(w)) {
            tok.index_.emplace(w, tok.vocab_.size());
            tok.vocab_.push_back(w);
        }
    return tok;
}

Tokenizer Tokenizer::from_vocab(const std::vector<std::string>& vocab) {
    if (vocab.size() < num_specials || !std::equal(kSpecials.begin(), kSpecials.end(), vocab.begin()))
        throw ConfigError("vocabulary does not start with the special tokens");
    Tokenizer tok;
    for (std::size_t i = num_specials; i < vocab.size(); ++i) {
        if (!tok.index_.emplace(vocab[i], i).second) throw ConfigError("duplicate vocabulary entry '" + vocab[i] + "'");
        tok.vocab_.push_back(vocab[i]);
    }
    return tok;
}

std::vector<std::size_t> Tokenizer::encode(const std::string& text) const {
    std::vector<std::size_t> ids;
    for (const auto& w : split_words(text)) {
        auto it = index_.find(w);
        ids.push_back(it == index_.end() ? unk : it->second);
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const std::size_t> ids) const {
    std::string out;
    for (std::size_t id : ids) {
        if (is_special(id) || id >= vocab_.size()) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab_[id];
    }
    return out;
}

std::optional<std::size_t> Tokenizer::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Projector::Projector(ParameterSet& ps, std::size_t in_dim, std::size_t out_dim, const std::string& prefix)
    : fc1_(ps, prefix + ".fc1", ParamGroup::projector, in_dim, out_dim),
      fc2_(ps, prefix + ".fc2", ParamGroup::projector, out_dim, out_dim) {}

ad::Var LoraAdapter::delta(const ad::Var& x, bool train, std::uint64_t seed) const {
    ad::Var in = train && dropout > 0 ? ad::dropout(x, real(dropout), seed) : x;
    return ad::scale(ad::matmul_nt(ad::matmul_nt(in, a), b), real(scaling));
}

ToyDecoderLM::ToyDecoderLM(ParameterSet& ps, const DecoderConfig& cfg, const std::string& prefix) : cfg_(cfg) {
    if (cfg.vocab_size <= Tokenizer::num_specials) throw ConfigError("decoder vocabulary is empty");
    if (cfg.num_heads == 0 || cfg.dim % cfg.num_heads != 0) throw ConfigError("decoder: heads must divide dim");
    if (cfg.lora.rank == 0) throw ConfigError("LoRA rank must be positive");
    const auto g = ParamGroup::base;
    const std::size_t d = cfg.dim;
    token_embedding_ = ps.normal(prefix + ".token_embedding", g, {cfg.vocab_size, d}, 0.02 * std::sqrt(double(d)));
    position_embedding_ = ps.normal(prefix + ".position_embedding", g, {cfg.max_positions, d}, 0.02 * std::sqrt(double(d)));
    auto lora = [&](const std::string& p, std::size_t in, std::size_t out) {
        LoraAdapter ad;
        ad.a = ps.normal(p + ".lora_a", ParamGroup::adapter, {cfg.lora.rank, in}, 1.0 / std::sqrt(double(in)));
        ad.b = ps.constant(p + ".lora_b", ParamGroup::adapter, {out, cfg.lora.rank}, real(0));
        ad.scaling = cfg.lora.alpha / double(cfg.lora.rank);
        ad.dropout = cfg.lora.dropout;
        return ad;
    };
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        blocks_.push_back({LayerNorm(ps, p + ".norm_attn", g, d), Linear(ps, p + ".q", g, d, d), Linear(ps, p + ".k", g, d, d),
                           Linear(ps, p + ".v", g, d, d), Linear(ps, p + ".o", g, d, d), lora(p + ".q", d, d),
                           lora(p + ".v", d, d), LayerNorm(ps, p + ".norm_ffn", g, d),
                           Linear(ps, p + ".fc1", g, d, d * cfg.ffn_mult), Linear(ps, p + ".fc2", g, d * cfg.ffn_mult, d)});
    }
    final_norm_ = LayerNorm(ps, prefix + ".final_norm", g, d);
}

ad::Var ToyDecoderLM::embed_tokens(std::span<const std::size_t> ids) const {
    for (std::size_t id : ids)
        if (id >= cfg_.vocab_size) throw ShapeError("token id " + std::to_string(id) + " outside the vocabulary");
    return ad::embedding_lookup(token_embedding_, ids);
}

ad::Var ToyDecoderLM::forward(const ad::Var& inputs, std::span<const std::size_t> lengths, bool train,
                              std::uint64_t seed) const {
    if (inputs.cols() != cfg_.dim) throw ShapeError("decoder expects width " + std::to_string(cfg_.dim));
    std::vector<std::size_t> positions;
    positions.reserve(inputs.rows());
    for (std::size_t len : lengths) {
        if (len > cfg_.max_positions)
            throw ConfigError("prompt of " + std::to_string(len) + " positions exceeds max_positions " +
                              std::to_string(cfg_.max_positions));
        for (std::size_t i = 0; i < len; ++i) positions.push_back(i);
    }
    if (positions.size() != inputs.rows()) throw ShapeError("decoder: lengths do not cover the inputs");
    const auto pattern = ad::AttentionPattern::causal(lengths);

    ad::Var x = ad::add(inputs, ad::embedding_lookup(position_embedding_, positions));
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const Block& B = blocks_[l];
        ad::Var h = B.norm_attn(x);
        ad::Var q = B.q(h);
        ad::Var v = B.v(h);
        if (lora_enabled_) {
            q = ad::add(q, B.lora_q.delta(h, train, derive_seed(seed, 2 * l)));
            v = ad::add(v, B.lora_v.delta(h, train, derive_seed(seed, 2 * l + 1)));
        }
        x = ad::add(x, B.o(ad::attention(q, B.k(h), v, pattern, cfg_.num_heads)));
        ad::Var f = B.norm_ffn(x);
        x = ad::add(x, B.fc2(ad::gelu(B.fc1(f))));
    }
    return final_norm_(x);
}

ad::Var ToyDecoderLM::logits(const ad::Var& hidden) const { return ad::matmul_nt(hidden, token_embedding_); }

std::vector<Slot> prompt_slots(const Tokenizer& tok, std::size_t soft_begin, std::size_t soft_count,
                               std::span<const std::size_t> question_ids) {
    std::vector<Slot> slots;
    slots.push_back({false, Tokenizer::bos});
    for (std::size_t id : tok.encode(kPromptPrefix)) slots.push_back({false, id});
    slots.push_back({false, Tokenizer::graph_open});
    for (std::size_t i = 0; i < soft_count; ++i) slots.push_back({true, soft_begin + i});
    slots.push_back({false, Tokenizer::graph_close});
    for (std::size_t id : tok.encode(kPromptSeparator)) slots.push_back({false, id});
    for (std::size_t id : question_ids) slots.push_back({false, id});
    return slots;
}

ad::Var embed_slots(const ToyDecoderLM& lm, const std::vector<std::vector<Slot>>& sequences, const ad::Var& soft) {
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> soft_ids;
    for (const auto& seq : sequences)
        for (const Slot& s : seq) (s.soft ? soft_ids : token_ids).push_back(s.index);
    if (!soft_ids.empty() && !soft) throw ShapeError("embed_slots: soft slots without soft rows");
    // Gather tokens and soft rows into one stacked matrix, then permute rows
    // into slot order with a single gather.
    std::vector<ad::Var> parts;
    if (!token_ids.empty()) parts.push_back(lm.embed_tokens(token_ids));
    if (!soft_ids.empty()) {
        for (std::size_t i : soft_ids)
            if (i >= soft.rows()) throw ShapeError("embed_slots: soft row " + std::to_string(i) + " out of range");
        parts.push_back(ad::gather_rows(soft, soft_ids));
    }
    if (parts.empty()) throw ShapeError("embed_slots: nothing to embed");
    ad::Var stacked = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
    std::vector<std::size_t> order;
    std::size_t ti = 0, si = token_ids.size();
    for (const auto& seq : sequences)
        for (const Slot& s : seq) order.push_back(s.soft ? si++ : ti++);
    return ad::gather_rows(stacked, order);
}

ad::Var assemble_prompt(const ToyDecoderLM& lm, const Tokenizer& tok, const ad::Var& h_llm, const std::string& question) {
    const auto q = tok.encode(question);
    if (!q.empty() && std::all_of(q.begin(), q.end(), [](std::size_t id) { return id == Tokenizer::unk; }))
        log::warn("question has no known tokens: '" + question + "'");
    return embed_slots(lm, {prompt_slots(tok, 0, h_llm.rows(), q)}, h_llm);
}

std::vector<std::vector<std::size_t>> greedy_decode(const ToyDecoderLM& lm, const Tokenizer& tok,
                                                    const std::vector<std::vector<Slot>>& prompts, const ad::Var& soft,
                                                    std::size_t max_len) {
    ad::NoGradGuard guard;
    const std::size_t n = prompts.size();
    std::vector<std::vector<std::size_t>> out(n);
    std::vector<std::vector<Slot>> seqs = prompts;
    std::vector<bool> done(n, false);
    const std::size_t V = tok.size();
    for (std::size_t step = 0; step < max_len; ++step) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < n; ++i)
            if (!done[i]) active.push_back(i);
        if (active.empty()) break;
        std::vector<std::vector<Slot>> batch;
        std::vector<std::size_t> lengths;
        for (std::size_t i : active) {
            batch.push_back(seqs[i]);
            lengths.push_back(seqs[i].size());
        }
        ad::Var hidden = lm.forward(embed_slots(lm, batch, soft), lengths);
        std::vector<std::size_t> last;
        std::size_t off = 0;
        for (std::size_t len : lengths) {
            off += len;
            last.push_back(off - 1);
        }
        const Tensor logits = lm.logits(ad::gather_rows(hidden, last)).value();
        for (std::size_t a = 0; a < active.size(); ++a) {
            std::size_t best = Tokenizer::eos;
            real best_v = -std::numeric_limits<real>::infinity();
            for (std::size_t v = 0; v < V; ++v) {
                if (tok.is_special(v) && v != Tokenizer::eos) continue;
                const real z = logits.at(a, v);
                if (z > best_v) {
                    best_v = z;
                    best = v;
                }
            }
            const std::size_t i = active[a];
            if (best == Tokenizer::eos) {
                done[i] = true;
            } else {
                out[i].push_back(best);
                seqs[i].push_back({false, best});
            }
        }
    }
    return out;
}

std::string normalize_answer(const std::string& s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            space = !out.empty();
        } else {
            if (space) out.push_back(' ');
            space = false;
            out.push_back(char(std::tolower(c)));
        }
    }
    return out;
}

bool answer_matches(const std::string& pred, const std::string& gold) {
    const std::string p = normalize_answer(pred);
    if (p.empty()) return false;
    return normalize_answer(gold).find(p) != std::string::npos;
}

} // namespace dygenc
