#include "ssn/losses.hpp"

#include "ssn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ssn {

namespace {

void check_shapes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DataError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
}

double bce(double y, double p, double clamp) {
    const double q = std::clamp(p, clamp, 1.0 - clamp);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double bce_grad(double y, double p, double clamp) {
    if (p < clamp || p > 1.0 - clamp) return 0.0;
    return -y / p + (1.0 - y) / (1.0 - p);
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Cross entropy on a logit; the clamp bounds are mapped into logit space.
double bce_logit(double y, double z, double clamp) {
    const double lo = std::log(clamp) - std::log1p(-clamp);
    if (z < lo || z > -lo) return bce(y, sigmoid(z), clamp);
    return y * softplus(-z) + (1.0 - y) * softplus(z);
}

double bce_logit_grad(double y, double z, double clamp) {
    const double lo = std::log(clamp) - std::log1p(-clamp);
    if (z < lo || z > -lo) return 0.0;
    return sigmoid(z) - y;
}

std::size_t argmax_first(const Eigen::VectorXd& w) {
    std::size_t best = 0;
    for (Eigen::Index k = 1; k < w.size(); ++k)
        if (w[k] > w[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(k);
    return best;
}

}  // namespace

void LossWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(label)) throw ConfigError("loss.lambda_label must be finite and >= 0");
    if (!ok(unlabel)) throw ConfigError("loss.lambda_unlabel must be finite and >= 0");
    if (!ok(quality)) throw ConfigError("loss.lambda_quality must be finite and >= 0");
}

void validate_tau(double tau) {
    if (!(tau > 0.5 && tau <= 1.0))
        throw ConfigError("loss.tau must be in (0.5, 1]; at tau <= 0.5 every class passes the confidence gate");
}

double label_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p, double clamp) {
    check_shapes(y, p, "label_loss");
    if (p.rows() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index c = 0; c < p.cols(); ++c) sum += bce(y(i, c), p(i, c), clamp);
    return sum / static_cast<double>(p.rows());
}

Eigen::MatrixXd label_loss_grad(const Eigen::MatrixXd& y, const Eigen::MatrixXd& p, double clamp) {
    check_shapes(y, p, "label_loss_grad");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    if (p.rows() == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index c = 0; c < p.cols(); ++c) g(i, c) = bce_grad(y(i, c), p(i, c), clamp) * inv_n;
    return g;
}

PseudoTargets pseudo_targets(const Eigen::MatrixXd& p, double tau) {
    validate_tau(tau);
    PseudoTargets out{Eigen::MatrixXd::Zero(p.rows(), p.cols()), Eigen::MatrixXd::Zero(p.rows(), p.cols())};
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            const double v = p(i, c);
            if (std::max(v, 1.0 - v) >= tau) {
                out.mask(i, c) = 1.0;
                out.targets(i, c) = v >= tau ? 1.0 : 0.0;
            }
        }
    return out;
}

double masked_label_loss(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask, const Eigen::MatrixXd& p,
                         double clamp) {
    check_shapes(targets, p, "masked_label_loss");
    check_shapes(mask, p, "masked_label_loss");
    if (p.rows() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            if (mask(i, c) != 0.0) sum += bce(targets(i, c), p(i, c), clamp);
    return sum / static_cast<double>(p.rows());
}

Eigen::MatrixXd masked_label_loss_grad(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                       const Eigen::MatrixXd& p, double clamp) {
    check_shapes(targets, p, "masked_label_loss_grad");
    check_shapes(mask, p, "masked_label_loss_grad");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p.rows(), p.cols());
    if (p.rows() == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            if (mask(i, c) != 0.0) g(i, c) = bce_grad(targets(i, c), p(i, c), clamp) * inv_n;
    return g;
}

double masked_label_loss_logits(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                const Eigen::MatrixXd& z, double clamp) {
    check_shapes(targets, z, "masked_label_loss_logits");
    check_shapes(mask, z, "masked_label_loss_logits");
    if (z.rows() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            if (mask(i, c) != 0.0) sum += bce_logit(targets(i, c), z(i, c), clamp);
    return sum / static_cast<double>(z.rows());
}

Eigen::MatrixXd masked_label_loss_logits_grad(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& mask,
                                              const Eigen::MatrixXd& z, double clamp) {
    check_shapes(targets, z, "masked_label_loss_logits_grad");
    check_shapes(mask, z, "masked_label_loss_logits_grad");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    if (z.rows() == 0) return g;
    const double inv_n = 1.0 / static_cast<double>(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            if (mask(i, c) != 0.0) g(i, c) = bce_logit_grad(targets(i, c), z(i, c), clamp) * inv_n;
    return g;
}

double unlabeled_loss(const Eigen::MatrixXd& p, double tau, double clamp) {
    const auto pt = pseudo_targets(p, tau);
    return masked_label_loss(pt.targets, pt.mask, p, clamp);
}

Eigen::MatrixXd unlabeled_loss_grad(const Eigen::MatrixXd& p, double tau, double clamp) {
    const auto pt = pseudo_targets(p, tau);
    return masked_label_loss_grad(pt.targets, pt.mask, p, clamp);
}

double quality_loss(std::span<const Eigen::VectorXd> weights, std::span<const std::optional<std::size_t>> best) {
    if (weights.size() != best.size()) throw DataError("quality_loss: weights and best flags differ in length");
    if (weights.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!best[i]) continue;
        const auto& w = weights[i];
        if (*best[i] >= static_cast<std::size_t>(w.size())) throw DataError("quality_loss: best index out of range");
        const double gap = w[static_cast<Eigen::Index>(*best[i])] - w.maxCoeff();
        sum += gap * gap;
    }
    return sum / static_cast<double>(weights.size());
}

std::vector<Eigen::VectorXd> quality_loss_grad(std::span<const Eigen::VectorXd> weights,
                                               std::span<const std::optional<std::size_t>> best) {
    if (weights.size() != best.size()) throw DataError("quality_loss_grad: weights and best flags differ in length");
    std::vector<Eigen::VectorXd> out;
    out.reserve(weights.size());
    const double inv_n = weights.empty() ? 0.0 : 1.0 / static_cast<double>(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& w = weights[i];
        Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
        if (best[i]) {
            const auto b = static_cast<Eigen::Index>(*best[i]);
            const auto top = static_cast<Eigen::Index>(argmax_first(w));
            const double gap = w[b] - w[top];
            if (gap != 0.0) {
                g[b] += 2.0 * gap * inv_n;
                g[top] -= 2.0 * gap * inv_n;
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

LossBreakdown total_loss(double label_term, double unlabel_term, double quality_term, const LossWeights& weights) {
    LossBreakdown out;
    out.label_term = label_term;
    out.unlabel_term = unlabel_term;
    out.quality_term = quality_term;
    out.total = weights.label * label_term + weights.unlabel * unlabel_term + weights.quality * quality_term;
    return out;
}

}  // namespace ssn
