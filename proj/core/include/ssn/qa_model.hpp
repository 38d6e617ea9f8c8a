#pragma once

// Question-and-answer classifier: sentence interaction grid, dynamic 2D
// interaction kernels with adaptive max pooling, question-guided attention
// over answers, concatenation and a sigmoid multi-label head.

#include "ssn/encoder.hpp"
#include "ssn/tensor.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ssn {

// (question sentences, answer sentences) covered by one interaction kernel.
struct KernelSize {
    std::size_t rows = 1;
    std::size_t cols = 1;

    friend bool operator==(const KernelSize&, const KernelSize&) = default;
};

struct QAModelConfig {
    std::size_t dim = 128;             // d
    std::size_t max_q_sentences = 8;   // m
    std::size_t max_a_sentences = 6;   // n
    std::size_t max_answers = 5;       // K
    std::vector<KernelSize> kernels = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    std::size_t filters = 8;           // F, per kernel size
    std::size_t pool = 4;              // P, pooled grid is P x P
    double dropout = 0.4;
    std::size_t num_classes = 3;

    // Throws ConfigError; also rejects kernels larger than the m x n grid.
    void validate() const;
    std::size_t interaction_width() const { return kernels.size() * filters * pool * pool; }
    std::size_t concat_width() const { return 2 * dim + interaction_width(); }
    EncodingShape encoding_shape() const { return {max_q_sentences, max_a_sentences, max_answers}; }
};

struct KernelBank {
    KernelSize size;
    // F x (rows * cols * 2d). Column (a * cols + b) * 2d + ch holds the weight
    // for grid offset (a, b) and channel ch; channels [0, d) read the question
    // sentence, [d, 2d) the answer sentence.
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;  // F
};

struct QAModelParams {
    std::vector<KernelBank> kernels;
    Eigen::MatrixXd attn_w;   // W_s, d x d
    double attn_b = 0.0;      // b_s
    Eigen::MatrixXd head_w;   // W^C, |C| x concat_width
    Eigen::VectorXd head_b;   // b^C

    static QAModelParams zeros(const QAModelConfig& config);
    // Xavier-uniform kernels and head, small Gaussian attention form.
    static QAModelParams init(const QAModelConfig& config, std::uint64_t seed);

    std::vector<TensorView> tensors();
    std::vector<ConstTensorView> tensors() const;
    bool all_finite() const;
};

// Rank-3 m x n x 2d array; cell (i, j) = [q_i ; a_j].
class InteractionMatrix {
public:
    InteractionMatrix(std::size_t rows, std::size_t cols, std::size_t channels)
        : rows_(rows), cols_(cols), channels_(channels), data_(rows * cols * channels, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t channels() const noexcept { return channels_; }
    double& at(std::size_t i, std::size_t j, std::size_t ch) { return data_[(i * cols_ + j) * channels_ + ch]; }
    double at(std::size_t i, std::size_t j, std::size_t ch) const { return data_[(i * cols_ + j) * channels_ + ch]; }

private:
    std::size_t rows_, cols_, channels_;
    std::vector<double> data_;
};

InteractionMatrix build_interaction_matrix(const Eigen::MatrixXd& q_sent, const Eigen::MatrixXd& a_sent);

// Reference path over an explicit interaction matrix: valid 2D convolution per
// kernel size, adaptive max pooling to P x P, flatten, concatenate in
// (kernel, filter, pool row, pool col) order.
Eigen::VectorXd apply_interaction_kernels(const InteractionMatrix& grid, const QAModelParams& params,
                                          const QAModelConfig& config);

// Pool windows of adaptive pooling from `input` cells to `output` cells
// (start = floor(o * in / out), end = ceil((o + 1) * in / out)).
struct PoolWindow {
    std::size_t begin;
    std::size_t end;
};
std::vector<PoolWindow> adaptive_pool_windows(std::size_t input, std::size_t output);

// Cache of one answer's interaction features, enough to backpropagate.
struct InteractionCache {
    // Per kernel: conv grid extent and, per (filter, pool cell), the argmax
    // (row, col) in the conv grid.
    std::vector<std::size_t> conv_rows;
    std::vector<std::size_t> conv_cols;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> argmax;
};

// Same values as apply_interaction_kernels without materializing the grid:
// convolution over concatenated channels splits into a question-row term plus
// an answer-column term.
Eigen::VectorXd interaction_features(const Eigen::MatrixXd& q_sent, const Eigen::MatrixXd& a_sent,
                                     const QAModelParams& params, const QAModelConfig& config,
                                     InteractionCache* cache = nullptr);

// s_k = tanh(q^T W_s a_k + b_s); softmax over the first `answer_count` slots,
// padded slots get exactly zero weight.
struct AttentionResult {
    Eigen::VectorXd scores;   // K, zero for padded slots
    Eigen::VectorXd weights;  // K
};
AttentionResult attention_scores(const Eigen::VectorXd& q_doc, std::span<const Eigen::VectorXd> a_docs,
                                 std::size_t answer_count, const QAModelParams& params);

// sum_k w_k v_k
Eigen::VectorXd aggregate_answers(const Eigen::VectorXd& weights, std::span<const Eigen::VectorXd> vectors);

struct ForwardTrace {
    AttentionResult attention;
    std::vector<Eigen::VectorXd> interaction;  // h^(q&a),k after dropout; zero for padded slots
    Eigen::VectorXd interaction_agg;           // h^(q&a)
    Eigen::VectorXd answer_agg;                // h^(A)
    Eigen::VectorXd concat;                    // [h^(Q); h^(q&a); h^(A)]
    Eigen::VectorXd logits;
    Eigen::VectorXd probs;

    // Backward caches.
    std::vector<InteractionCache> caches;
    std::vector<Eigen::VectorXd> dropout_masks;  // empty when not training
};

struct ForwardOptions {
    bool training = false;
    std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

ForwardTrace forward(const EncodedSample& sample, const QAModelParams& params, const QAModelConfig& config,
                     const ForwardOptions& options = {});

// Accumulates dLoss/dparams into `grads` given dLoss/dlogits and an extra
// dLoss/dweights term (from the quality-aware loss; may be empty).
void backward(const EncodedSample& sample, const QAModelParams& params, const QAModelConfig& config,
              const ForwardTrace& trace, const Eigen::VectorXd& dlogits, const Eigen::VectorXd& dweights,
              QAModelParams& grads);

// Logistic function, clamped so the result stays strictly inside (0, 1).
double sigmoid(double z);

}  // namespace ssn
