#pragma once

// Supervised warm-up of the Q&A model followed by self-training: confident
// predictions on unlabeled questions are frozen into a growing pseudo-labeled
// set and the model is retrained on the union each generation.

#include "ssn/dataset.hpp"
#include "ssn/encoder.hpp"
#include "ssn/losses.hpp"
#include "ssn/qa_model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssn {

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    std::string optimizer = "adam";  // "adam" | "sgd"
    double lr_end_factor = 0.1;      // linear decay target, as a fraction of learning_rate
    std::size_t min_epochs = 3;
    std::size_t max_epochs = 50;
    double loss_epsilon = 1e-3;        // epoch-over-epoch loss change
    double generation_epsilon = 1e-3;  // generation-over-generation validation micro-F1 change
    std::size_t max_generations = 5;
    double tau = 0.7;
    double validation_fraction = 0.1;
    double grad_clip = 5.0;  // global norm; <= 0 disables
    double prob_clamp = kDefaultProbClamp;
    LossWeights weights;
    std::uint64_t seed = 42;

    void validate() const;
};

// Encoded samples kept next to their source records.
struct EncodedDataset {
    Dataset dataset;
    std::vector<EncodedSample> encoded;

    std::size_t size() const noexcept { return encoded.size(); }
};

EncodedDataset encode_dataset(const Encoder& encoder, const Dataset& dataset, const EncodingShape& shape);

// One training row. Real labels have a full mask; pseudo rows carry the mask
// frozen at admission.
struct TrainExample {
    const EncodedSample* sample = nullptr;
    Eigen::VectorXd targets;
    Eigen::VectorXd mask;
    bool pseudo = false;
};

// Total loss of a batch: label cross entropy averaged over real rows, masked
// pseudo cross entropy averaged over pseudo rows, quality penalty averaged
// over all rows. When `grads` is non-null the gradient of `total` is added to it.
LossBreakdown batch_loss(std::span<const TrainExample> batch, const QAModelParams& params,
                         const QAModelConfig& model, const TrainConfig& train, QAModelParams* grads = nullptr,
                         const ForwardOptions& options = {});

Eigen::MatrixXd predict_probabilities(const QAModelParams& params, const QAModelConfig& model,
                                      std::span<const EncodedSample> samples);

struct EpochRecord {
    std::size_t generation = 0;
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double grad_norm = 0.0;  // mean pre-clip norm over the epoch's steps
    LossBreakdown loss;      // full-set loss in evaluation mode after the epoch
};

struct GenerationRecord {
    std::size_t generation = 0;
    std::size_t admitted_new = 0;
    std::size_t admitted_total = 0;
    std::size_t epochs = 0;
    LossBreakdown loss;
    double validation_f1 = 0.0;
};

struct TrainCallbacks {
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<void(const GenerationRecord&, const QAModelParams&)> on_generation;
};

struct TrainState {
    std::size_t generation = 0;  // last completed generation
    // D_u*: admitted samples in admission order, labels frozen.
    std::vector<Sample> pseudo;
    std::vector<std::size_t> pseudo_source;  // index into D_u per admitted sample
    std::vector<GenerationRecord> history;
    std::vector<QAModelParams> snapshots;  // parameters after each generation
    std::size_t best_generation = 0;
    std::size_t skipped_no_answers = 0;  // labeled samples the Q&A model cannot use
    std::size_t validation_size = 0;
};

struct TrainResult {
    QAModelParams params;
    TrainState state;
};

// Trains on `examples` until the full-set loss changes by less than
// loss_epsilon (after min_epochs) or max_epochs is reached. Throws
// NumericalError on a non-finite loss or parameter.
std::size_t fit(QAModelParams& params, std::span<const TrainExample> examples, const QAModelConfig& model,
                const TrainConfig& train, std::uint64_t seed, std::size_t generation = 0,
                const TrainCallbacks& callbacks = {}, LossBreakdown* final_loss = nullptr);

// Supervised warm-up on D_l with the label and quality terms.
QAModelParams warmup_train(const EncodedDataset& labeled, const QAModelConfig& model, const TrainConfig& train,
                           const TrainCallbacks& callbacks = {});

// Per class: confident iff max(p, 1 - p) >= tau, label = [p >= tau]. A sample
// with at least one confident class becomes a pseudo sample (answers kept,
// unconfident classes labeled 0 and masked out); others are left out.
struct PseudoResult {
    Dataset dataset;                   // kind = pseudo
    std::vector<std::size_t> source;   // index into the input per kept sample
};
PseudoResult pseudo_from_probabilities(const Dataset& unlabeled, const Eigen::MatrixXd& probs, double tau);

PseudoResult predict_pseudo(const QAModelParams& params, const QAModelConfig& model, const EncodedDataset& unlabeled,
                            double tau);

TrainResult self_train(const EncodedDataset& labeled, const EncodedDataset& unlabeled, const QAModelConfig& model,
                       const TrainConfig& train, const TrainCallbacks& callbacks = {});

Dataset pseudo_dataset(const TrainState& state, std::size_t num_classes);

}  // namespace ssn
