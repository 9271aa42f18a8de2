#include "dygenc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "dygenc/config.hpp"
#include "dygenc/errors.hpp"
#include "dygenc/log.hpp"
#include "dygenc/optim.hpp"
#include "dygenc/rng.hpp"

namespace dygenc {

// ---- configuration ------------------------------------------------------------

void TrainConfig::apply_profile(const std::string& name) {
    if (name == "paper")
        lr = 2e-5;
    else if (name == "desk")
        lr = 3e-4;
    else
        throw ConfigError("unknown profile '" + name + "' (expected paper or desk)");
    profile = name;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
    if (patience > epochs) throw ConfigError("patience (" + std::to_string(patience) + ") exceeds epochs (" + std::to_string(epochs) + ")");
    if (warmup_epochs < 0 || warmup_epochs > double(epochs)) throw ConfigError("warmup_epochs must lie in [0, epochs]");
    if (!(lr > 0) || !(adapter_lr > 0)) throw ConfigError("learning rates must be positive");
    if (model.k_tokens == 0) throw ConfigError("k_tokens must be at least 1");
    if (eval_batch_size == 0) throw ConfigError("eval_batch_size must be at least 1");
    if (clip_norm < 0) throw ConfigError("clip_norm must be non-negative");
}

nlohmann::ordered_json TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["profile"] = profile;
    j["corpus"] = corpus;
    j["output"] = output;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["warmup_epochs"] = warmup_epochs;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["patience"] = patience;
    j["max_seq_len"] = max_seq_len;
    j["clip_norm"] = clip_norm;
    j["adapter_epochs"] = adapter_epochs;
    j["adapter_lr"] = adapter_lr;
    j["eval_batch_size"] = eval_batch_size;
    j["seed"] = seed;
    j["model"] = model.to_json();
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::ordered_json& j) {
    TrainConfig c;
    try {
        c.profile = j.at("profile");
        c.corpus = j.at("corpus");
        c.output = j.at("output");
        c.batch_size = j.at("batch_size");
        c.epochs = j.at("epochs");
        c.warmup_epochs = j.at("warmup_epochs");
        c.lr = j.at("lr");
        c.weight_decay = j.at("weight_decay");
        c.patience = j.at("patience");
        c.max_seq_len = j.at("max_seq_len");
        c.clip_norm = j.at("clip_norm");
        c.adapter_epochs = j.at("adapter_epochs");
        c.adapter_lr = j.at("adapter_lr");
        c.eval_batch_size = j.at("eval_batch_size");
        c.seed = j.at("seed");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.model = ModelConfig::from_json(j.at("model"));
    return c;
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
    auto u = [](auto member) -> Setter {
        return [member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_uint(k, v); };
    };
    auto d = [](auto member) -> Setter {
        return [member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); };
    };
    auto mu = [](auto member) -> Setter {
        return [member](TrainConfig& c, const std::string& k, const std::string& v) { c.model.*member = parse_uint(k, v); };
    };
    auto mb = [](auto member) -> Setter {
        return [member](TrainConfig& c, const std::string& k, const std::string& v) { c.model.*member = parse_bool(k, v); };
    };
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"profile", [](TrainConfig& c, const std::string&, const std::string& v) { c.apply_profile(v); }},
        {"corpus", [](TrainConfig& c, const std::string&, const std::string& v) { c.corpus = v; }},
        {"output", [](TrainConfig& c, const std::string&, const std::string& v) { c.output = v; }},
        {"batch_size", u(&TrainConfig::batch_size)},
        {"epochs", u(&TrainConfig::epochs)},
        {"warmup_epochs", d(&TrainConfig::warmup_epochs)},
        {"lr", d(&TrainConfig::lr)},
        {"weight_decay", d(&TrainConfig::weight_decay)},
        {"patience", u(&TrainConfig::patience)},
        {"max_seq_len", u(&TrainConfig::max_seq_len)},
        {"clip_norm", d(&TrainConfig::clip_norm)},
        {"adapter_epochs", u(&TrainConfig::adapter_epochs)},
        {"adapter_lr", d(&TrainConfig::adapter_lr)},
        {"eval_batch_size", u(&TrainConfig::eval_batch_size)},
        {"seed", u(&TrainConfig::seed)},
        {"text_dim", mu(&ModelConfig::text_dim)},
        {"lpe_dim", mu(&ModelConfig::lpe_dim)},
        {"embed_seed", mu(&ModelConfig::embed_seed)},
        {"graph_dim", mu(&ModelConfig::graph_dim)},
        {"graph_layers", mu(&ModelConfig::graph_layers)},
        {"graph_heads", mu(&ModelConfig::graph_heads)},
        {"temporal_kind",
         [](TrainConfig& c, const std::string&, const std::string& v) { c.model.temporal = temporal_kind_from_string(v); }},
        {"k_tokens", mu(&ModelConfig::k_tokens)},
        {"qformer_layers", mu(&ModelConfig::qformer_layers)},
        {"qformer_heads", mu(&ModelConfig::qformer_heads)},
        {"llm_dim", mu(&ModelConfig::llm_dim)},
        {"llm_layers", mu(&ModelConfig::llm_layers)},
        {"llm_heads", mu(&ModelConfig::llm_heads)},
        {"max_positions", mu(&ModelConfig::max_positions)},
        {"lora_rank", [](TrainConfig& c, const std::string& k, const std::string& v) { c.model.lora.rank = parse_uint(k, v); }},
        {"lora_alpha", [](TrainConfig& c, const std::string& k, const std::string& v) { c.model.lora.alpha = parse_double(k, v); }},
        {"lora_dropout",
         [](TrainConfig& c, const std::string& k, const std::string& v) { c.model.lora.dropout = parse_double(k, v); }},
        {"enable_GE", mb(&ModelConfig::enable_ge)},
        {"enable_TE", mb(&ModelConfig::enable_te)},
        {"enable_SE", mb(&ModelConfig::enable_se)},
    };
    return table;
}

const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> a = {{"k", "k_tokens"}, {"temporal", "temporal_kind"}};
    return a;
}

} // namespace

void set_config_value(TrainConfig& cfg, const std::string& key_in, const std::string& value) {
    std::string key = key_in;
    if (auto it = aliases().find(key); it != aliases().end()) key = it->second;
    for (const auto& [k, set] : setters())
        if (k == key) {
            set(cfg, k, value);
            return;
        }
    throw ConfigError("unknown config key '" + key_in + "'");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& kv : setters()) out.push_back(kv.first);
    return out;
}

TrainConfig parse_train_config(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    for (const auto& e : parse_config_entries(text, origin)) {
        try {
            set_config_value(cfg, e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(origin + ":" + std::to_string(e.line) + ": " + err.what());
        }
    }
    return cfg;
}

TrainConfig load_train_config(const std::string& path) { return parse_train_config(read_text_file(path), path); }

// ---- training -----------------------------------------------------------------

EarlyStop early_stop(const std::vector<double>& val, std::size_t patience) {
    EarlyStop r;
    double best = -1;
    std::size_t since = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        r.ran = i + 1;
        if (val[i] > best) {
            best = val[i];
            r.best = i;
            since = 0;
        } else if (++since >= patience) {
            break;
        }
    }
    return r;
}

Tokenizer corpus_tokenizer(const std::vector<QASample>& corpus) {
    std::vector<std::string> texts;
    for (const auto& s : corpus) {
        texts.push_back(s.question);
        texts.push_back(s.answer);
    }
    return Tokenizer::build(texts);
}

TrainResult train(const TrainConfig& cfg, const std::vector<QASample>& corpus, const TrainHooks& hooks) {
    const Tokenizer tok = corpus_tokenizer(corpus);
    const TextEmbedder emb(cfg.model.text_dim, cfg.model.embed_seed);
    const PreparedCorpus prepared = prepare_corpus(corpus, tok, emb, cfg.model.lpe_dim);
    return train(cfg, prepared, tok, hooks);
}

namespace {

struct PhaseSpec {
    std::string name;
    std::size_t epochs;
    double lr;
};

} // namespace

TrainResult train(const TrainConfig& cfg, const PreparedCorpus& corpus, const Tokenizer& tok, const TrainHooks& hooks) {
    cfg.validate();
    TrainResult result;
    std::vector<std::size_t> train_ids;
    for (std::size_t i : corpus.indices(Split::train)) {
        if (corpus.episodes[corpus.samples[i].episode].graphs.size() > cfg.max_seq_len)
            ++result.dropped_train;
        else
            train_ids.push_back(i);
    }
    const std::vector<std::size_t> val_ids = corpus.indices(Split::val);
    if (train_ids.empty()) throw ConfigError("train split is empty");
    if (val_ids.empty()) throw ConfigError("val split is empty");
    if (result.dropped_train)
        log::info("dropped " + std::to_string(result.dropped_train) + " training samples longer than " +
                  std::to_string(cfg.max_seq_len) + " frames");

    ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    result.model = std::make_unique<DyGEncModel>(mc, tok);
    DyGEncModel& model = *result.model;
    ParameterSet& params = model.params();

    Checkpoint best = snapshot(params);
    bool best_lora = false;
    const std::size_t steps_per_epoch = (train_ids.size() + cfg.batch_size - 1) / cfg.batch_size;

    std::vector<PhaseSpec> phases{{"joint", cfg.epochs, cfg.lr}};
    if (cfg.adapter_epochs > 0) phases.push_back({"adapter", cfg.adapter_epochs, cfg.adapter_lr});

    for (const PhaseSpec& phase : phases) {
        if (phase.name == "adapter") {
            restore(params, best);
            params.set_trainable(ParamGroup::base, false);
            model.lm().set_lora_enabled(true);
        }
        AdamW opt(params, cfg.weight_decay);
        const std::uint64_t total = phase.epochs * steps_per_epoch;
        const std::uint64_t warmup =
            phase.name == "joint" ? std::uint64_t(std::llround(cfg.warmup_epochs * double(steps_per_epoch))) : 0;
        std::uint64_t phase_step = 0;
        std::size_t since_best = 0;
        for (std::size_t epoch = 1; epoch <= phase.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<std::size_t> order = train_ids;
            std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, phase.name), epoch));
            std::shuffle(order.begin(), order.end(), rng);
            double loss_sum = 0;
            double lr_now = 0;
            for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
                const std::span<const std::size_t> batch(order.data() + b, std::min(cfg.batch_size, order.size() - b));
                params.zero_grad();
                ad::Var l = model.loss(corpus, batch, true, derive_seed(cfg.seed, result.steps));
                ad::backward(l);
                lr_now = cosine_schedule(phase_step, warmup, total, phase.lr);
                opt.step(lr_now, cfg.clip_norm);
                ++phase_step;
                ++result.steps;
                const double lv = double(l.value().item());
                loss_sum += lv;
                if (hooks.on_step) hooks.on_step(result.steps, lv);
            }
            const double val = evaluate(model, corpus, val_ids, cfg.eval_batch_size).rows.back().accuracy();
            const bool improved = val > result.best_val_accuracy;
            if (improved) {
                best = snapshot(params);
                best_lora = model.lm().lora_enabled();
                result.best_val_accuracy = val;
                result.best_epoch = epoch;
                result.best_phase = phase.name;
                since_best = 0;
            } else {
                ++since_best;
            }
            result.history.push_back({phase.name, epoch, result.steps, lr_now, loss_sum / double(steps_per_epoch), val, improved});
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::ostringstream msg;
            msg << phase.name << " epoch " << epoch << ": loss " << loss_sum / double(steps_per_epoch) << ", val accuracy "
                << val << " (" << secs << " s)";
            log::info(msg.str());
            if (since_best >= cfg.patience && cfg.patience > 0) break;
        }
    }
    restore(params, best);
    model.lm().set_lora_enabled(best_lora);
    params.set_trainable(ParamGroup::base, true);
    return result;
}

// ---- evaluation ---------------------------------------------------------------

const EvalRow* EvalReport::row(const std::string& template_id) const {
    for (const auto& r : rows)
        if (r.template_id == template_id) return &r;
    return nullptr;
}

double EvalReport::accuracy(const std::vector<std::string>& template_ids) const {
    std::size_t n = 0, c = 0;
    for (const auto& t : template_ids)
        if (const EvalRow* r = row(t)) {
            n += r->count;
            c += r->correct;
        }
    return n ? double(c) / double(n) : 0.0;
}

EvalReport evaluate(const DyGEncModel& model, const PreparedCorpus& corpus, const std::vector<std::size_t>& ids,
                    std::size_t batch_size) {
    EvalReport rep;
    rep.sample_ids = ids;
    for (std::size_t b = 0; b < ids.size(); b += batch_size) {
        const std::span<const std::size_t> batch(ids.data() + b, std::min(batch_size, ids.size() - b));
        for (auto& p : model.predict(corpus, batch)) rep.predictions.push_back(std::move(p));
    }
    std::map<std::string, EvalRow> by_template;
    EvalRow all{"all"};
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const PreparedSample& s = corpus.samples[ids[i]];
        const bool ok = answer_matches(rep.predictions[i], s.answer);
        rep.correct.push_back(ok);
        EvalRow& r = by_template[s.template_id];
        r.template_id = s.template_id;
        ++r.count;
        ++all.count;
        r.correct += ok;
        all.correct += ok;
    }
    for (auto& [t, r] : by_template) rep.rows.push_back(r);
    rep.rows.push_back(all);
    return rep;
}

EvalReport evaluate(const DyGEncModel& model, const PreparedCorpus& corpus, Split split, std::size_t batch_size) {
    return evaluate(model, corpus, corpus.indices(split), batch_size);
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
    out << "template_id,count,correct,accuracy\n";
    out.precision(6);
    for (const auto& r : report.rows) out << r.template_id << ',' << r.count << ',' << r.correct << ',' << std::fixed << r.accuracy() << '\n';
    out.unsetf(std::ios::fixed);
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history) {
    out << "phase,epoch,steps,lr,train_loss,val_accuracy,best\n";
    out.precision(17);
    for (const auto& m : history)
        out << m.phase << ',' << m.epoch << ',' << m.steps << ',' << m.lr << ',' << m.train_loss << ',' << m.val_accuracy
            << ',' << (m.best ? 1 : 0) << '\n';
}

// ---- checkpoints ---------------------------------------------------------------

Checkpoint model_checkpoint(const DyGEncModel& model, const TrainConfig& cfg) {
    nlohmann::ordered_json meta;
    meta["train_config"] = cfg.to_json();
    meta["model_config"] = model.config().to_json();
    meta["vocab"] = model.tokenizer().vocab();
    meta["lora_enabled"] = model.lm().lora_enabled();
    return snapshot(model.params(), meta);
}

std::unique_ptr<DyGEncModel> model_from_checkpoint(const Checkpoint& ckpt) {
    const auto& meta = ckpt.meta;
    if (!meta.contains("model_config") || !meta.contains("vocab"))
        throw ConfigError("checkpoint does not describe a model (missing model_config or vocab)");
    auto model = std::make_unique<DyGEncModel>(ModelConfig::from_json(meta.at("model_config")),
                                               Tokenizer::from_vocab(meta.at("vocab").get<std::vector<std::string>>()));
    restore(model->params(), ckpt);
    model->lm().set_lora_enabled(meta.value("lora_enabled", false));
    return model;
}

// ---- compression ---------------------------------------------------------------

std::string textualize(const SceneGraph& g) {
    std::string out;
    std::vector<bool> touched(g.nodes().size(), false);
    auto sentence = [&](const std::string& s) {
        if (!out.empty()) out.push_back(' ');
        out += s + " .";
    };
    for (const auto& e : g.edges()) {
        touched[*g.index_of(e.src)] = touched[*g.index_of(e.dst)] = true;
        sentence(g.node(e.src)->label + " " + e.predicate + " " + g.node(e.dst)->label);
    }
    for (std::size_t i = 0; i < g.nodes().size(); ++i)
        if (!touched[i]) sentence(g.nodes()[i].label);
    return out;
}

CompressionReport compression_report(const std::vector<QASample>& corpus, const Tokenizer& tok, const ModelConfig& cfg) {
    CompressionReport rep;
    double ratio = 0, soft = 0, text = 0;
    for (const auto& s : corpus) {
        std::size_t tokens = 0;
        for (const auto& f : s.dg.frames()) tokens += tok.encode(textualize(f.graph)).size();
        if (tokens == 0) continue;
        const std::size_t positions = cfg.enable_se ? cfg.k_tokens : s.dg.size();
        ratio += double(positions) / double(tokens);
        soft += double(positions);
        text += double(tokens);
        ++rep.samples;
    }
    if (rep.samples) {
        rep.ratio = ratio / double(rep.samples);
        rep.mean_soft_positions = soft / double(rep.samples);
        rep.mean_text_tokens = text / double(rep.samples);
    }
    return rep;
}

} // namespace dygenc
