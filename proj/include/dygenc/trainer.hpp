#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dygenc/checkpoint.hpp"
#include "dygenc/json.hpp"
#include "dygenc/pipeline.hpp"

namespace dygenc {

struct TrainConfig {
    std::string profile = "desk";
    std::string corpus;            // JSONL path (CLI only)
    std::string output;            // run directory (CLI only)
    std::size_t batch_size = 32;
    std::size_t epochs = 5;
    double warmup_epochs = 1;
    double lr = 3e-4;
    double weight_decay = 0.05;
    std::size_t patience = 2;
    std::size_t max_seq_len = 60;  // longer training sequences are dropped
    double clip_norm = 1.0;        // 0 disables clipping
    std::size_t adapter_epochs = 0;  // frozen-base LoRA phase after the joint phase
    double adapter_lr = 1e-3;
    std::size_t eval_batch_size = 64;
    std::uint64_t seed = 0;
    ModelConfig model;

    // "paper": lr 2e-5; "desk": lr 3e-4.
    void apply_profile(const std::string& name);
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::ordered_json& j);
};

// Assigns one field by name from its text value; throws ConfigError on an
// unknown key or a malformed value.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// "key = value" lines, '#' starts a comment. Errors name the line.
TrainConfig parse_train_config(const std::string& text, const std::string& origin = "<config>");
TrainConfig load_train_config(const std::string& path);

struct EpochMetrics {
    std::string phase;      // "joint" or "adapter"
    std::size_t epoch;      // 1-based within the phase
    std::size_t steps;      // cumulative optimizer steps
    double lr;              // learning rate of the last step
    double train_loss;      // mean batch loss over the epoch
    double val_accuracy;
    bool best;
};

struct TrainResult {
    std::unique_ptr<DyGEncModel> model;  // holds the best-validation weights
    std::vector<EpochMetrics> history;
    std::string best_phase;
    std::size_t best_epoch = 0;
    double best_val_accuracy = -1;
    std::size_t dropped_train = 0;
    std::size_t steps = 0;
};

struct TrainHooks {
    // Called after every optimizer step with (step, batch loss).
    std::function<void(std::size_t, double)> on_step;
};

// Vocabulary of every question and answer in the corpus.
Tokenizer corpus_tokenizer(const std::vector<QASample>& corpus);

TrainResult train(const TrainConfig& cfg, const std::vector<QASample>& corpus, const TrainHooks& hooks = {});
TrainResult train(const TrainConfig& cfg, const PreparedCorpus& corpus, const Tokenizer& tok,
                  const TrainHooks& hooks = {});

// Early-stopping rule on a sequence of validation accuracies: index of the
// best epoch and the number of epochs run before stopping.
struct EarlyStop {
    std::size_t best = 0;
    std::size_t ran = 0;
};
EarlyStop early_stop(const std::vector<double>& val_accuracy, std::size_t patience);

struct EvalRow {
    std::string template_id;  // or "all"
    std::size_t count = 0;
    std::size_t correct = 0;
    double accuracy() const { return count ? double(correct) / double(count) : 0.0; }
};

struct EvalReport {
    std::vector<EvalRow> rows;            // templates in sorted order, then "all"
    std::vector<std::size_t> sample_ids;
    std::vector<std::string> predictions;
    std::vector<bool> correct;

    const EvalRow* row(const std::string& template_id) const;
    double accuracy(const std::vector<std::string>& template_ids) const;
};

EvalReport evaluate(const DyGEncModel& model, const PreparedCorpus& corpus, const std::vector<std::size_t>& sample_ids,
                    std::size_t batch_size = 64);
EvalReport evaluate(const DyGEncModel& model, const PreparedCorpus& corpus, Split split, std::size_t batch_size = 64);

void write_eval_csv(std::ostream& out, const EvalReport& report);
void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& history);

// Checkpoint of a trained model: tensors plus config, vocabulary and adapter state.
Checkpoint model_checkpoint(const DyGEncModel& model, const TrainConfig& cfg);
std::unique_ptr<DyGEncModel> model_from_checkpoint(const Checkpoint& ckpt);

// One sentence per edge ("subject predicate object .") plus one per isolated node.
std::string textualize(const SceneGraph& g);

struct CompressionReport {
    double ratio = 0;             // mean over samples of soft positions / textual tokens
    double mean_soft_positions = 0;
    double mean_text_tokens = 0;
    std::size_t samples = 0;
};

// Soft positions are k with the sequence encoder and m (frames) without it.
CompressionReport compression_report(const std::vector<QASample>& corpus, const Tokenizer& tok, const ModelConfig& cfg);

} // namespace dygenc
