#pragma once

// Training objectives of the Q&A model: labeled cross entropy, thresholded
// pseudo-label cross entropy, the quality-aware attention penalty and their
// weighted total. Every loss comes with its gradient with respect to its
// inputs so the trainer can chain it into the model's backward pass.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ssn {

inline constexpr double kDefaultProbClamp = 1e-7;

struct LossWeights {
    double label = 1.0;    // lambda_L
    double unlabel = 1.0;  // lambda_U
    double quality = 1.0;  // lambda_Q

    void validate() const;
};

struct LossBreakdown {
    double label_term = 0.0;
    double unlabel_term = 0.0;
    double quality_term = 0.0;
    double total = 0.0;
    std::size_t labeled_samples = 0;
    std::size_t unlabeled_samples = 0;
    std::size_t pseudo_classes = 0;  // (sample, class) pairs that passed the threshold
    std::size_t quality_samples = 0;
};

// Mean over rows of -sum_c [y log p + (1 - y) log(1 - p)], p clamped to
// [clamp, 1 - clamp]. y and p are N x |C|. An empty batch has zero loss.
double label_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p, double clamp = kDefaultProbClamp);
// dLoss/dp; zero where the clamp is active.
Eigen::MatrixXd label_loss_grad(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p,
                                double clamp = kDefaultProbClamp);

// Confidence gate and polarity for unlabeled predictions: a (sample, class)
// pair is included iff max(p, 1 - p) >= tau, and its target is [p >= tau].
struct PseudoTargets {
    Eigen::MatrixXd targets;  // 0/1
    Eigen::MatrixXd mask;     // 0/1
};
// Throws ConfigError unless tau is in (0.5, 1].
PseudoTargets pseudo_targets(const Eigen::MatrixXd& p, double tau);
void validate_tau(double tau);

// Cross entropy over the included pairs only, averaged over rows. Targets and
// mask are constants (no gradient flows through them).
double masked_label_loss(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask, const Eigen::MatrixXd& p,
                         double clamp = kDefaultProbClamp);
Eigen::MatrixXd masked_label_loss_grad(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                       const Eigen::MatrixXd& p, double clamp = kDefaultProbClamp);

// The same cross entropies evaluated on logits z with p = sigmoid(z). Inside
// the clamp range they equal the probability forms but keep full precision
// when p saturates; the gradient is with respect to z.
double masked_label_loss_logits(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                const Eigen::MatrixXd& z, double clamp = kDefaultProbClamp);
Eigen::MatrixXd masked_label_loss_logits_grad(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                              const Eigen::MatrixXd& z, double clamp = kDefaultProbClamp);

// Unlabeled-sample loss with targets and gate derived from p itself.
double unlabeled_loss(const Eigen::MatrixXd& p, double tau, double clamp = kDefaultProbClamp);
// Gradient with the derived targets and gate held constant.
Eigen::MatrixXd unlabeled_loss_grad(const Eigen::MatrixXd& p, double tau, double clamp = kDefaultProbClamp);

// Mean over all samples of sum over flagged best answers of (w_best - max_j w_j)^2.
// Samples without a flagged best answer contribute zero but still count in
// the mean.
double quality_loss(std::span<const Eigen::VectorXd> weights, std::span<const std::optional<std::size_t>> best);
// dLoss/dweights per sample; the max is not gradient-stopped.
std::vector<Eigen::VectorXd> quality_loss_grad(std::span<const Eigen::VectorXd> weights,
                                               std::span<const std::optional<std::size_t>> best);

LossBreakdown total_loss(double label_term, double unlabel_term, double quality_term, const LossWeights& weights);

}  // namespace ssn
