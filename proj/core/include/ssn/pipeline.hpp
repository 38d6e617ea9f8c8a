#pragma once

// Four-stage composition: self-training of the Q&A model, pseudo-labeling of
// D_u, LLM augmentation with selection, and the question-only classifier on
// the fused set. Also hosts evaluation and k-fold orchestration.

#include "ssn/augmentation.hpp"
#include "ssn/config.hpp"
#include "ssn/dataset.hpp"
#include "ssn/encoder.hpp"
#include "ssn/llm_client.hpp"
#include "ssn/metrics.hpp"
#include "ssn/q_model.hpp"
#include "ssn/ssl_trainer.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ssn {

// Model-shaping config hashes stored in checkpoints.
std::string qa_config_hash(const RunConfig& config);
std::string q_config_hash(const RunConfig& config);

// Checkpoints guarded by the model-shaping config hash.
void save_qa_checkpoint(const std::string& dir, const QAModelParams& params, const RunConfig& config,
                        const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
QAModelParams load_qa_checkpoint(const std::string& dir, const RunConfig& config);
void save_q_checkpoint(const std::string& dir, const QModelParams& params, const RunConfig& config,
                       const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
QModelParams load_q_checkpoint(const std::string& dir, const RunConfig& config);

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& config);

struct PipelineOptions {
    bool self_training = true;
    bool augmentation = true;  // also requires config.augment.enabled
    std::function<void(const std::string&)> log;
    TrainCallbacks qa_callbacks;
    std::function<void(const QEpochRecord&)> on_q_epoch;
};

struct PseudoStage {
    TrainResult qa;
    PseudoResult pseudo;  // predict_pseudo on all of D_u with the selected parameters
};

// Warm-up plus self-training on (labeled, unlabeled), then the exported D_u*.
PseudoStage pseudo_label_stage(const RunConfig& config, const Encoder& encoder, const Dataset& labeled,
                               const Dataset& unlabeled, const TrainCallbacks& callbacks = {});

// Generates candidates from `labeled` and scores them against it.
GenerationResult augment_stage(const RunConfig& config, const Encoder& encoder, LlmClient& client,
                               const Dataset& labeled);

struct PipelineResult {
    std::optional<PseudoStage> ssl;
    std::optional<GenerationResult> augmentation;
    Dataset pseudo;    // empty when self-training is off
    Dataset selected;  // empty when augmentation is off
    Dataset fused;
    std::size_t excluded_partial = 0;
    QModelParams q;
};

// `client` may be null when augmentation is off.
PipelineResult run_pipeline(const RunConfig& config, const Dataset& labeled, const Dataset* unlabeled,
                            const Encoder& encoder, LlmClient* client, const PipelineOptions& options = {});

Metrics evaluate_q(const QModelParams& params, const RunConfig& config, const Dataset& test);
// Micro ROC points of the Q-model on `test`, for external plotting.
nlohmann::ordered_json roc_points_json(const QModelParams& params, const RunConfig& config, const Dataset& test);

// Runs the pipeline once per fold of `labeled` and evaluates on the held-out
// fold. D_u is shared by every fold; pseudo-labels and augmentation are
// recomputed from each fold's training split. Errors are rethrown with the
// fold number prepended.
MetricsReport cross_validate(const RunConfig& config, const Dataset& labeled, const Dataset* unlabeled,
                             const Encoder& encoder, LlmClient* client, const PipelineOptions& options = {});

// Paired comparison of two fold reports: per-metric mean difference and the
// exact Wilcoxon signed-rank p-value.
nlohmann::ordered_json compare_reports(const MetricsReport& a, const MetricsReport& b);

}  // namespace ssn
