#pragma once

// Question-only classifier trained on the fused dataset: hashed token
// embeddings, a bidirectional LSTM, mean pooling over time and a sigmoid
// multi-label head.

#include "ssn/dataset.hpp"
#include "ssn/losses.hpp"
#include "ssn/tensor.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

struct QModelConfig {
    std::size_t vocab_buckets = 8192;  // tokens are hashed into this many embedding rows
    std::size_t embed_dim = 64;
    std::size_t hidden = 256;  // per direction
    std::size_t max_tokens = 64;
    double dropout = 0.4;  // on the pooled representation, training only
    double threshold = 0.5;
    std::size_t num_classes = 3;

    void validate() const;
};

struct LstmParams {
    Eigen::MatrixXd wx;  // 4H x E, gate order (input, forget, cell, output)
    Eigen::MatrixXd wh;  // 4H x H
    Eigen::VectorXd b;   // 4H
};

struct QModelParams {
    Eigen::MatrixXd embedding;  // E x vocab_buckets, one column per bucket
    LstmParams fwd;
    LstmParams bwd;
    Eigen::MatrixXd head_w;  // |C| x 2H
    Eigen::VectorXd head_b;

    static QModelParams zeros(const QModelConfig& config);
    static QModelParams init(const QModelConfig& config, std::uint64_t seed);

    std::vector<TensorView> tensors();
    std::vector<ConstTensorView> tensors() const;
    bool all_finite() const;
};

// Bucket ids of the first max_tokens tokens. Throws DataError when the text
// has no tokens.
std::vector<std::size_t> token_ids(std::string_view text, const QModelConfig& config);

struct QPrediction {
    Eigen::VectorXd probs;
    LabelVector label;
};

QPrediction predict_q(const QModelParams& params, const QModelConfig& config, std::string_view text);
// N x |C| probabilities.
Eigen::MatrixXd predict_q_batch(const QModelParams& params, const QModelConfig& config,
                                std::span<const std::string> texts);

struct QTrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double lr_end_factor = 0.1;
    std::size_t min_epochs = 3;
    std::size_t max_epochs = 30;
    double loss_epsilon = 1e-3;
    double grad_clip = 5.0;
    double prob_clamp = kDefaultProbClamp;
    std::uint64_t seed = 42;

    void validate() const;
};

struct QEpochRecord {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double loss = 0.0;  // full-set label loss in evaluation mode
};

// Loss of one batch of token sequences with full labels (N x |C| targets).
// With `grads`, adds the gradient. `rng` enables dropout.
double q_batch_loss(const QModelParams& params, const QModelConfig& config,
                    std::span<const std::vector<std::size_t>> tokens, const Eigen::MatrixXd& targets,
                    double prob_clamp, QModelParams* grads = nullptr, std::mt19937_64* rng = nullptr);

QModelParams train_q(const Dataset& fused, const QModelConfig& config, const QTrainConfig& train,
                     const std::function<void(const QEpochRecord&)>& on_epoch = {});

}  // namespace ssn
