#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "dygenc/checkpoint.hpp"
#include "dygenc/errors.hpp"
#include "dygenc/optim.hpp"
#include "dygenc/synth.hpp"
#include "dygenc/trainer.hpp"

using namespace dygenc;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.patience = 2;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.model.graph_dim = 16;
    cfg.model.graph_layers = 1;
    cfg.model.graph_heads = 2;
    cfg.model.qformer_layers = 1;
    cfg.model.qformer_heads = 2;
    cfg.model.llm_dim = 16;
    cfg.model.llm_layers = 1;
    cfg.model.llm_heads = 2;
    cfg.model.text_dim = 16;
    return cfg;
}

const std::vector<QASample>& tiny_corpus() {
    static const auto c = synth::generate_corpus(synth::WorldSpec::defaults(), 20, 3);
    return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dygenc_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST(EarlyStop, StopsAfterPatienceWithoutGain) {
    const auto r = early_stop({0.5, 0.6, 0.59, 0.58}, 2);
    EXPECT_EQ(r.best, 1u);
    EXPECT_EQ(r.ran, 4u);
    const auto s = early_stop({0.5, 0.6, 0.59, 0.58, 0.7}, 2);
    EXPECT_EQ(s.ran, 4u);  // the later gain is never seen
    const auto t = early_stop({0.1, 0.2, 0.3}, 1);
    EXPECT_EQ(t.best, 2u);
    EXPECT_EQ(t.ran, 3u);
    // A tie is not an improvement.
    EXPECT_EQ(early_stop({0.4, 0.4, 0.4}, 2).best, 0u);
}

TEST(Schedule, WarmupThenCosine) {
    EXPECT_DOUBLE_EQ(cosine_schedule(0, 10, 110, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(cosine_schedule(5, 10, 110, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(cosine_schedule(10, 10, 110, 1.0), 1.0);
    EXPECT_NEAR(cosine_schedule(60, 10, 110, 2.0), 1.0, 1e-15);
    EXPECT_NEAR(cosine_schedule(35, 10, 110, 1.0), 0.5 * (1 + std::cos(std::numbers::pi / 4)), 1e-15);
    EXPECT_NEAR(cosine_schedule(110, 10, 110, 1.0), 0.0, 1e-15);
    EXPECT_THROW(cosine_schedule(0, 20, 10, 1.0), ConfigError);
}

TEST(AdamW, MatchesHandComputedSteps) {
    Tensor p({1}), g({1});
    p[0] = 1.0;
    g[0] = 0.5;
    AdamWState st;
    st.lr = 0.1;
    st.weight_decay = 0.1;
    Tensor* pv[] = {&p};
    const Tensor* gv[] = {&g};
    adamw_step(pv, gv, st);
    // Step 1: bias-corrected m/√v = g/|g|.
    const double x1 = 1.0 * (1 - 0.01) - 0.1 * 0.5 / (0.5 + 1e-8);
    EXPECT_NEAR(p[0], x1, 1e-15);
    g[0] = -0.25;
    adamw_step(pv, gv, st);
    const double m = 0.9 * 0.9 * 0 + 0.9 * 0.1 * 0.5 + 0.1 * -0.25;
    const double v = 0.999 * 0.001 * 0.25 + 0.001 * 0.0625;
    const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p[0], x1 * (1 - 0.01) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-14);
    g[0] = std::nan("");
    const double before = p[0];
    EXPECT_THROW(adamw_step(pv, gv, st), NumericsError);
    EXPECT_EQ(p[0], before);
}

TEST(AdamW, DecayOnlyOnMatricesAndClipping) {
    ParameterSet ps(1);
    ad::Var w = ps.constant("w", ParamGroup::base, {2, 2}, 1.0);
    ad::Var b = ps.constant("b", ParamGroup::base, {2}, 1.0);
    AdamW opt(ps, 0.5);
    // Zero gradients: only weight decay moves anything.
    ad::Var loss = ad::scale(ad::add(ad::sum(w), ad::sum(b)), 0.0);
    ad::backward(loss);
    opt.step(0.1);
    EXPECT_NEAR(w.value()[0], 0.95, 1e-15);
    EXPECT_EQ(b.value()[0], 1.0);

    ps.zero_grad();
    ad::backward(ad::scale(ad::sum(b), 100.0));
    EXPECT_NEAR(grad_norm(ps), std::sqrt(2.0) * 100, 1e-9);
    ps.set_trainable(ParamGroup::base, false);
    opt.step(0.1, 1.0);
    EXPECT_EQ(b.value()[0], 1.0);
}

TEST(Config, ParsesKeysAndAliases) {
    const TrainConfig cfg = parse_train_config("# desk run\nepochs = 7\nlr = 0.002\nk = 4\ntemporal = ape\nenable_SE = false\n");
    EXPECT_EQ(cfg.epochs, 7u);
    EXPECT_DOUBLE_EQ(cfg.lr, 0.002);
    EXPECT_EQ(cfg.model.k_tokens, 4u);
    EXPECT_EQ(cfg.model.temporal, TemporalKind::ape);
    EXPECT_FALSE(cfg.model.enable_se);
    EXPECT_EQ(TrainConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}

TEST(Config, ErrorsNameOriginAndLine) {
    try {
        parse_train_config("epochs = 3\n\nlr = fast\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
    }
    try {
        parse_train_config("epochs = 3\nwarp = 9\n", "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("warp"), std::string::npos) << e.what();
    }
    TrainConfig cfg;
    EXPECT_THROW(set_config_value(cfg, "nonsense", "1"), ConfigError);
    EXPECT_THROW(set_config_value(cfg, "temporal", "sundial"), ConfigError);
    cfg.patience = 9;
    cfg.epochs = 3;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(load_train_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, Profiles) {
    TrainConfig cfg;
    cfg.apply_profile("paper");
    EXPECT_DOUBLE_EQ(cfg.lr, 2e-5);
    EXPECT_THROW(cfg.apply_profile("laptop"), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
    ParameterSet ps(4);
    ps.normal("a.weight", ParamGroup::encoder, {3, 5}, 1.0);
    ps.normal("b.bias", ParamGroup::adapter, {7}, 1.0);
    const auto dir = scratch_dir("ckpt");
    save_checkpoint(dir, snapshot(ps, {{"note", "x"}}));
    const Checkpoint back = load_checkpoint(dir);
    ASSERT_EQ(back.tensors.size(), 2u);
    EXPECT_EQ(back.meta["note"], "x");
    ParameterSet other(99);
    other.normal("a.weight", ParamGroup::encoder, {3, 5}, 1.0);
    other.normal("b.bias", ParamGroup::adapter, {7}, 1.0);
    restore(other, back);
    EXPECT_EQ(other.find("a.weight")->var.value(), ps.find("a.weight")->var.value());
    EXPECT_EQ(other.find("b.bias")->group, ParamGroup::adapter);
    ParameterSet wrong(1);
    wrong.normal("a.weight", ParamGroup::encoder, {5, 3}, 1.0);
    EXPECT_ANY_THROW(restore(wrong, back));
    std::filesystem::remove_all(dir);
}

TEST(Training, DeterministicAndRestorable) {
    const TrainConfig cfg = tiny_config();
    const TrainResult a = train(cfg, tiny_corpus());
    const TrainResult b = train(cfg, tiny_corpus());
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].val_accuracy, b.history[i].val_accuracy);
        EXPECT_TRUE(std::isfinite(a.history[i].train_loss));
    }
    const auto& pa = a.model->params().all();
    const auto& pb = b.model->params().all();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].var.value(), pb[i].var.value()) << pa[i].name;

    // Checkpoint → model reproduces predictions.
    const auto dir = scratch_dir("model");
    save_checkpoint(dir, model_checkpoint(*a.model, cfg));
    const auto restored = model_from_checkpoint(load_checkpoint(dir));
    const Tokenizer tok = corpus_tokenizer(tiny_corpus());
    const PreparedCorpus pc = prepare_corpus(tiny_corpus(), tok, TextEmbedder(cfg.model.text_dim, cfg.model.embed_seed),
                                             cfg.model.lpe_dim);
    const auto test = pc.indices(Split::test);
    EXPECT_EQ(a.model->predict(pc, test), restored->predict(pc, test));
    std::filesystem::remove_all(dir);

    // Different seed, different weights.
    TrainConfig other = cfg;
    other.seed = 1;
    const TrainResult c = train(other, tiny_corpus());
    EXPECT_NE(c.model->params().all()[0].var.value(), pa[0].var.value());
}

TEST(Training, EvalReportAndCsv) {
    const TrainConfig cfg = tiny_config();
    const TrainResult r = train(cfg, tiny_corpus());
    const Tokenizer tok = corpus_tokenizer(tiny_corpus());
    const PreparedCorpus pc = prepare_corpus(tiny_corpus(), tok, TextEmbedder(cfg.model.text_dim, cfg.model.embed_seed),
                                             cfg.model.lpe_dim);
    const EvalReport rep = evaluate(*r.model, pc, Split::val);
    ASSERT_FALSE(rep.rows.empty());
    EXPECT_EQ(rep.rows.back().template_id, "all");
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
        total += rep.rows[i].count;
        correct += rep.rows[i].correct;
        if (i > 0) EXPECT_LT(rep.rows[i - 1].template_id, rep.rows[i].template_id);
    }
    EXPECT_EQ(total, rep.rows.back().count);
    EXPECT_EQ(correct, rep.rows.back().correct);
    EXPECT_EQ(total, pc.indices(Split::val).size());
    std::ostringstream csv;
    write_eval_csv(csv, rep);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "template_id,count,correct,accuracy");
    std::ostringstream metrics;
    write_metrics_csv(metrics, r.history);
    EXPECT_NE(metrics.str().find("joint"), std::string::npos);
}

TEST(Textualize, OneSentencePerEdgeAndIsolatedNode) {
    const SceneGraph g({{0, "person"}, {1, "cup"}, {2, "table"}, {3, "door"}}, {{0, 1, "holds"}, {1, 2, "on"}});
    EXPECT_EQ(textualize(g), "person holds cup . cup on table . door .");
}

TEST(Compression, RatioAgainstHandCount) {
    QASample s;
    s.dg = DynamicGraph({{SceneGraph({{0, "person"}, {1, "cup"}}, {{0, 1, "holds"}}), 0},
                         {SceneGraph({{0, "person"}, {1, "cup"}}, {{0, 1, "near"}}), 3}});
    s.question = "q ?";
    s.answer = "cup";
    s.template_id = "X";
    const Tokenizer tok = Tokenizer::build({"person holds cup near"});
    ModelConfig cfg;
    cfg.k_tokens = 2;
    // "person holds cup ." twice: 4 tokens per frame, 8 in total.
    const auto with_se = compression_report({s}, tok, cfg);
    EXPECT_EQ(with_se.mean_text_tokens, 8.0);
    EXPECT_DOUBLE_EQ(with_se.ratio, 2.0 / 8.0);
    cfg.enable_se = false;
    cfg.k_tokens = 1;
    EXPECT_DOUBLE_EQ(compression_report({s}, tok, cfg).ratio, 2.0 / 8.0);
}
