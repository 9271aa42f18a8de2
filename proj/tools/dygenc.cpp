// Command-line front end: generate, train, eval, ablate, encode, retrieve, compression.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "dygenc/config.hpp"
#include "dygenc/errors.hpp"
#include "dygenc/log.hpp"
#include "dygenc/manifest.hpp"
#include "dygenc/retrieval.hpp"
#include "dygenc/rng.hpp"
#include "dygenc/synth.hpp"
#include "dygenc/trainer.hpp"

namespace fs = std::filesystem;
using namespace dygenc;

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("DYGENC_SEED");
    if (!v || !*v) return std::nullopt;
    return parse_uint("DYGENC_SEED", v);
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::vector<QASample> load_corpus(const std::string& path) {
    if (path.empty()) throw ConfigError("missing required field 'corpus'");
    if (!fs::exists(path)) throw ConfigError("corpus '" + path + "' does not exist");
    return load_jsonl(path);
}

PreparedCorpus prepare_for(const DyGEncModel& model, const std::vector<QASample>& samples) {
    const auto& mc = model.config();
    const TextEmbedder emb(mc.text_dim, mc.embed_seed);
    return prepare_corpus(samples, model.tokenizer(), emb, mc.lpe_dim);
}

void write_eval(const fs::path& path, const EvalReport& rep) {
    auto out = open_out(path);
    write_eval_csv(out, rep);
}

void write_predictions(const fs::path& path, const PreparedCorpus& corpus, const EvalReport& rep) {
    auto out = open_out(path);
    out << "sample,template_id,answer,prediction,correct\n";
    for (std::size_t i = 0; i < rep.sample_ids.size(); ++i) {
        const auto& s = corpus.samples[rep.sample_ids[i]];
        out << rep.sample_ids[i] << ',' << s.template_id << ',' << s.answer << ',' << rep.predictions[i] << ','
            << (rep.correct[i] ? 1 : 0) << '\n';
    }
}

struct RunOutputs {
    EvalReport val;
    EvalReport test;
    TrainResult result;
};

// Trains one configuration into `dir`: checkpoint/, metrics.csv, eval_val.csv,
// eval_test.csv and manifest.json.
RunOutputs run_training(const TrainConfig& cfg, const std::vector<QASample>& samples, const std::string& corpus_path,
                        const std::string& corpus_hash, const fs::path& dir, const std::string& command) {
    fs::create_directories(dir);
    RunOutputs r;
    r.result = train(cfg, samples);
    const auto& model = *r.result.model;
    const PreparedCorpus prepared = prepare_for(model, samples);
    r.val = evaluate(model, prepared, Split::val, cfg.eval_batch_size);
    r.test = evaluate(model, prepared, Split::test, cfg.eval_batch_size);

    const fs::path ckpt = dir / "checkpoint";
    save_checkpoint(ckpt, model_checkpoint(model, cfg));
    {
        auto out = open_out(dir / "metrics.csv");
        write_metrics_csv(out, r.result.history);
    }
    write_eval(dir / "eval_val.csv", r.val);
    write_eval(dir / "eval_test.csv", r.test);
    write_predictions(dir / "predictions_test.csv", prepared, r.test);

    RunManifest m;
    m.command = command;
    m.config = cfg.to_json();
    m.seed = cfg.seed;
    m.corpus = corpus_path;
    m.corpus_hash = corpus_hash;
    m.checkpoint = ckpt.string();
    for (const char* f : {"metrics.csv", "eval_val.csv", "eval_test.csv"}) m.metrics.push_back((dir / f).string());
    m.artifacts = {ckpt.string(), (dir / "predictions_test.csv").string()};
    m.write(dir / "manifest.json");
    return r;
}

TrainConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
        set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (auto s = env_seed()) cfg.seed = *s;
    cfg.validate();
    return cfg;
}

// ---- subcommands ----

struct GenerateArgs {
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string world;
    bool global_dedup = false;
};

int cmd_generate(const GenerateArgs& a) {
    synth::WorldSpec spec = a.world.empty() ? synth::WorldSpec::defaults()
                                            : synth::parse_world_spec(read_text_file(a.world), a.world);
    if (a.global_dedup) spec.global_dedup = true;
    const std::uint64_t seed = env_seed().value_or(a.seed);
    const auto samples = synth::generate_corpus(spec, a.episodes, seed);
    save_jsonl(samples, a.out);

    RunManifest m;
    m.command = "generate";
    m.config = {{"episodes", a.episodes}, {"world", a.world}, {"global_dedup", spec.global_dedup}};
    m.seed = seed;
    m.corpus = a.out;
    m.corpus_hash = git_blob_hash_file(a.out);
    m.artifacts = {a.out};
    m.write(sidecar(a.out));
    std::cout << "generated " << samples.size() << " samples from " << a.episodes << " episodes -> " << a.out << " ("
              << m.corpus_hash << ")\n";
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string corpus;
    std::string out;
    std::vector<std::string> set;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg = resolve_config(a.config, a.set);
    if (!a.corpus.empty()) cfg.corpus = a.corpus;
    if (!a.out.empty()) cfg.output = a.out;
    if (cfg.output.empty()) throw ConfigError("missing required field 'output'");
    const auto samples = load_corpus(cfg.corpus);
    const auto r = run_training(cfg, samples, cfg.corpus, git_blob_hash_file(cfg.corpus), cfg.output, "train");
    std::cout << "best " << r.result.best_phase << " epoch " << r.result.best_epoch << ", val accuracy "
              << r.result.best_val_accuracy << ", test accuracy " << r.test.row("all")->accuracy() << '\n';
    return 0;
}

struct EvalArgs {
    std::string ckpt;
    std::string corpus;
    std::string split = "test";
    std::string out;
    std::string predictions;
    bool reverse_time = false;
};

int cmd_eval(const EvalArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const auto model = model_from_checkpoint(ckpt);
    TrainConfig cfg = TrainConfig::from_json(ckpt.meta.at("train_config"));
    const std::string corpus_path = a.corpus.empty() ? cfg.corpus : a.corpus;
    auto samples = load_corpus(corpus_path);
    if (a.reverse_time)
        for (auto& s : samples) s.dg = synth::reverse_time(s.dg);
    const PreparedCorpus prepared = prepare_for(*model, samples);
    const EvalReport rep = a.split == "all" ? evaluate(*model, prepared, [&] {
        std::vector<std::size_t> ids(prepared.samples.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        return ids;
    }(), cfg.eval_batch_size)
                                            : evaluate(*model, prepared, split_from_string(a.split), cfg.eval_batch_size);
    write_eval(a.out, rep);
    RunManifest m;
    m.command = "eval";
    m.config = {{"split", a.split}, {"reverse_time", a.reverse_time}, {"train_config", cfg.to_json()}};
    m.seed = cfg.seed;
    m.corpus = corpus_path;
    m.corpus_hash = git_blob_hash_file(corpus_path);
    m.checkpoint = a.ckpt;
    m.metrics = {a.out};
    if (!a.predictions.empty()) {
        write_predictions(a.predictions, prepared, rep);
        m.artifacts.push_back(a.predictions);
    }
    m.write(sidecar(a.out));
    std::cout << "accuracy " << rep.row("all")->accuracy() << " on " << rep.row("all")->count << " samples\n";
    return 0;
}

struct AblateArgs {
    std::string config;
    std::string corpus;
    std::string out;
    std::vector<std::string> grid;
    std::vector<std::string> set;
};

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
    std::vector<GridAxis> axes;
    for (const auto& g : specs) {
        const auto eq = g.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == g.size())
            throw ConfigError("--grid expects key=v1,v2,..., got '" + g + "'");
        GridAxis ax{g.substr(0, eq), split_list(g.substr(eq + 1), ',')};
        for (const auto& v : ax.values)
            if (v.empty()) throw ConfigError("--grid '" + g + "' has an empty value");
        axes.push_back(std::move(ax));
    }
    return axes;
}

int cmd_ablate(const AblateArgs& a) {
    TrainConfig base = resolve_config(a.config, a.set);
    if (!a.corpus.empty()) base.corpus = a.corpus;
    const fs::path root = a.out.empty() ? fs::path(base.output) : fs::path(a.out);
    if (root.empty()) throw ConfigError("missing required field 'output'");
    const auto axes = parse_grid(a.grid);
    if (axes.empty()) throw ConfigError("ablate needs at least one --grid axis");
    const auto samples = load_corpus(base.corpus);
    const std::string hash = git_blob_hash_file(base.corpus);

    // "shuffle_answers" is a grid-only switch for the answer-shuffling control.
    std::vector<std::vector<std::string>> cells{{}};
    for (const auto& ax : axes) {
        std::vector<std::vector<std::string>> next;
        for (const auto& c : cells)
            for (const auto& v : ax.values) {
                auto n = c;
                n.push_back(v);
                next.push_back(std::move(n));
            }
        cells = std::move(next);
    }

    struct CellResult {
        std::string name;
        std::vector<std::string> values;
        RunOutputs out;
    };
    std::vector<CellResult> results;
    RunManifest top;
    top.command = "ablate";
    top.config = base.to_json();
    top.seed = base.seed;
    top.corpus = base.corpus;
    top.corpus_hash = hash;
    for (const auto& values : cells) {
        TrainConfig cfg = base;
        bool shuffle = false;
        std::string name;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            if (axes[i].key == "shuffle_answers")
                shuffle = parse_bool("shuffle_answers", values[i]);
            else
                set_config_value(cfg, axes[i].key, values[i]);
            name += (i ? "_" : "") + axes[i].key + "=" + values[i];
        }
        cfg.validate();
        const fs::path dir = root / name;
        cfg.output = dir.string();
        log::info("ablate cell " + name);
        const auto cell_samples = shuffle ? synth::shuffle_answers(samples, derive_seed(cfg.seed, "shuffle")) : samples;
        results.push_back(CellResult{name, values, run_training(cfg, cell_samples, base.corpus, hash, dir, "ablate")});
        top.artifacts.push_back((dir / "manifest.json").string());
        top.metrics.push_back((dir / "eval_test.csv").string());
    }

    std::vector<std::string> templates = synth::kTemplates;
    std::sort(templates.begin(), templates.end());
    const fs::path table = root / "table.csv";
    {
        auto out = open_out(table);
        out << "cell";
        for (const auto& ax : axes) out << ',' << ax.key;
        for (const auto& t : templates) out << ',' << t;
        out << ",all,val_accuracy,best_epoch\n";
        out.precision(6);
        for (const auto& r : results) {
            out << r.name;
            for (const auto& v : r.values) out << ',' << v;
            for (const auto& t : templates) {
                const EvalRow* row = r.out.test.row(t);
                out << ',';
                if (row) out << row->accuracy();
            }
            out << ',' << r.out.test.row("all")->accuracy() << ',' << r.out.result.best_val_accuracy << ','
                << r.out.result.best_epoch << '\n';
        }
    }
    top.metrics.push_back(table.string());
    top.write(root / "manifest.json");
    std::cout << "wrote " << results.size() << " runs and " << table.string() << '\n';
    return 0;
}

struct EncodeArgs {
    std::string ckpt;
    std::string corpus;
    std::size_t sample = 0;
    std::string out;
    std::string attention;
};

int cmd_encode(const EncodeArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const auto model = model_from_checkpoint(ckpt);
    const TrainConfig cfg = TrainConfig::from_json(ckpt.meta.at("train_config"));
    const std::string corpus_path = a.corpus.empty() ? cfg.corpus : a.corpus;
    const auto samples = load_corpus(corpus_path);
    if (a.sample >= samples.size())
        throw ConfigError("sample " + std::to_string(a.sample) + " out of range (corpus has " +
                          std::to_string(samples.size()) + ")");
    const PreparedCorpus prepared = prepare_for(*model, {samples[a.sample]});
    const PreparedEpisode* ep = &prepared.episodes[prepared.samples[0].episode];
    std::vector<AttentionMap> maps;
    EncodedBatch enc;
    {
        ad::NoGradGuard guard;
        enc = model->encode(std::span<const PreparedEpisode* const>(&ep, 1), &maps);
    }
    const Tensor& soft = enc.soft.value();
    {
        auto out = open_out(a.out);
        out.precision(17);
        out << "row";
        for (std::size_t j = 0; j < soft.cols(); ++j) out << ",v" << j;
        out << '\n';
        for (std::size_t i = 0; i < soft.rows(); ++i) {
            out << i;
            for (std::size_t j = 0; j < soft.cols(); ++j) out << ',' << soft.at(i, j);
            out << '\n';
        }
    }
    RunManifest m;
    m.command = "encode";
    m.config = {{"sample", a.sample}, {"train_config", cfg.to_json()}};
    m.seed = cfg.seed;
    m.corpus = corpus_path;
    m.corpus_hash = git_blob_hash_file(corpus_path);
    m.checkpoint = a.ckpt;
    m.artifacts = {a.out};
    if (!a.attention.empty()) {
        if (maps.empty()) log::warn("sequence encoder disabled; no attention maps to write");
        auto out = open_out(a.attention);
        write_attention_csv(out, maps);
        m.artifacts.push_back(a.attention);
    }
    m.write(sidecar(a.out));
    std::cout << "wrote " << soft.rows() << " soft-prompt rows of width " << soft.cols() << '\n';
    return 0;
}

struct RetrieveArgs {
    std::string in;
    std::string out;
    std::string query;
    std::size_t budget = 0;
};

int cmd_retrieve(const RetrieveArgs& a) {
    if (a.budget == 0) throw ConfigError("--budget must be at least 1");
    auto samples = load_corpus(a.in);
    const TextEmbedder emb(kRetrievalEmbedDim);
    std::size_t kept = 0, total = 0;
    for (auto& s : samples) {
        total += s.dg.size();
        s.dg = retrieve_frames(s.dg, a.query.empty() ? s.question : a.query, a.budget, emb);
        kept += s.dg.size();
    }
    save_jsonl(samples, a.out);
    RunManifest m;
    m.command = "retrieve";
    m.config = {{"query", a.query}, {"budget", a.budget}};
    m.corpus = a.in;
    m.corpus_hash = git_blob_hash_file(a.in);
    m.artifacts = {a.out};
    m.write(sidecar(a.out));
    std::cout << "kept " << kept << " of " << total << " frames over " << samples.size() << " samples\n";
    return 0;
}

struct CompressionArgs {
    std::string corpus;
    std::string config;
    std::string out;
    std::vector<std::string> set;
};

int cmd_compression(const CompressionArgs& a) {
    const TrainConfig cfg = resolve_config(a.config, a.set);
    const std::string corpus_path = a.corpus.empty() ? cfg.corpus : a.corpus;
    const auto samples = load_corpus(corpus_path);
    const Tokenizer tok = corpus_tokenizer(samples);
    ModelConfig with_se = cfg.model, without_se = cfg.model;
    with_se.enable_se = true;
    without_se.enable_se = false;
    {
        auto out = open_out(a.out);
        out << "configuration,k_tokens,samples,mean_soft_positions,mean_text_tokens,ratio\n";
        out.precision(6);
        for (const auto* mc : {&with_se, &without_se}) {
            const auto r = compression_report(samples, tok, *mc);
            out << (mc->enable_se ? "GE+SE" : "GE") << ',' << (mc->enable_se ? mc->k_tokens : 0) << ',' << r.samples
                << ',' << r.mean_soft_positions << ',' << r.mean_text_tokens << ',' << r.ratio << '\n';
        }
    }
    RunManifest m;
    m.command = "compression";
    m.config = cfg.to_json();
    m.seed = cfg.seed;
    m.corpus = corpus_path;
    m.corpus_hash = git_blob_hash_file(corpus_path);
    m.metrics = {a.out};
    m.write(sidecar(a.out));
    return 0;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const NumericsError*>(&e)) return "NumericsError";
    if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
    if (dynamic_cast<const EmptySequence*>(&e)) return "EmptySequence";
    if (dynamic_cast<const EmbedError*>(&e)) return "EmbedError";
    if (dynamic_cast<const EmptyGraphError*>(&e)) return "EmptyGraphError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "InternalError";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic scene-graph encoder for temporal question answering"};
    app.require_subcommand(1);
    app.fallthrough();
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only print warnings and errors on stderr");

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic QA corpus as JSONL");
    g->add_option("--episodes", gen.episodes, "Number of episodes")->required()->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.seed, "Root seed (DYGENC_SEED overrides)");
    g->add_option("--out", gen.out, "Output JSONL")->required();
    g->add_option("--world", gen.world, "World spec file (key = value)");
    g->add_flag("--global-dedup", gen.global_dedup, "Drop frames equal to any earlier frame");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model and write a run directory");
    t->add_option("--config", tr.config, "Config file (key = value)");
    t->add_option("--corpus", tr.corpus, "Corpus JSONL (overrides the config)");
    t->add_option("--out", tr.out, "Run directory (overrides the config)");
    t->add_option("--set", tr.set, "Override a config field: key=value");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint per template");
    e->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
    e->add_option("--corpus", ev.corpus, "Corpus JSONL (default: the one it was trained on)");
    e->add_option("--split", ev.split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    e->add_option("--out", ev.out, "Output CSV")->required();
    e->add_option("--predictions", ev.predictions, "Also write per-sample predictions");
    e->add_flag("--reverse-time", ev.reverse_time, "Evaluate on time-reversed episodes");

    AblateArgs ab;
    auto* a = app.add_subcommand("ablate", "Train one run per grid cell and merge the results");
    a->add_option("--config", ab.config, "Base config file");
    a->add_option("--corpus", ab.corpus, "Corpus JSONL (overrides the config)");
    a->add_option("--out", ab.out, "Output directory");
    a->add_option("--grid", ab.grid, "Axis key=v1,v2,... (repeatable; cells are the cartesian product)")->required();
    a->add_option("--set", ab.set, "Override a base config field: key=value");

    EncodeArgs en;
    auto* c = app.add_subcommand("encode", "Write the soft-prompt rows and attention maps of one sample");
    c->add_option("--ckpt", en.ckpt, "Checkpoint directory")->required();
    c->add_option("--corpus", en.corpus, "Corpus JSONL (default: the one it was trained on)");
    c->add_option("--sample", en.sample, "Sample index in the corpus");
    c->add_option("--out", en.out, "Soft-prompt CSV")->required();
    c->add_option("--attention", en.attention, "Attention CSV");

    RetrieveArgs re;
    auto* r = app.add_subcommand("retrieve", "Keep the frames most relevant to a query");
    r->add_option("--in", re.in, "Input JSONL")->required();
    r->add_option("--out", re.out, "Output JSONL")->required();
    r->add_option("--query", re.query, "Query text (default: each sample's question)");
    r->add_option("--budget", re.budget, "Frames to keep")->required();

    CompressionArgs co;
    auto* p = app.add_subcommand("compression", "Soft positions against textualised tokens");
    p->add_option("--corpus", co.corpus, "Corpus JSONL")->required();
    p->add_option("--config", co.config, "Config file");
    p->add_option("--out", co.out, "Output CSV")->required();
    p->add_option("--set", co.set, "Override a config field: key=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::cerr << "error: " << ex.what() << "\n\n" << app.help();
        return 2;
    }
    if (quiet) log::set_level(log::Level::warn);

    try {
        if (*g) return cmd_generate(gen);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_eval(ev);
        if (*a) return cmd_ablate(ab);
        if (*c) return cmd_encode(en);
        if (*r) return cmd_retrieve(re);
        if (*p) return cmd_compression(co);
    } catch (const std::exception& ex) {
        const auto* err = dynamic_cast<const Error*>(&ex);
        const int code = err ? err->exit_code() : 1;
        nlohmann::ordered_json j{{"error", error_kind(ex)}, {"message", ex.what()}, {"exit_code", code}};
        std::cerr << j.dump() << '\n';
        return code;
    }
    return 2;
}
