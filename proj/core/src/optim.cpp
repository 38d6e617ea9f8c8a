#include "ssn/optim.hpp"

#include "ssn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ssn {

void Adam::step(const std::vector<TensorView>& params, const std::vector<ConstTensorView>& grads) {
    if (params.size() != grads.size()) throw DataError("Adam: parameter/gradient tensor counts differ");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.values.size(), 0.0);
            v_.emplace_back(p.values.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw DataError("Adam: tensor count changed between steps");
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto p = params[t].values;
        auto g = grads[t].values;
        if (p.size() != g.size() || p.size() != m_[t].size()) throw DataError("Adam: tensor size mismatch");
        auto& m = m_[t];
        auto& v = v_[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
        }
    }
}

LinearSchedule::LinearSchedule(double base_lr, double start_factor, double end_factor, std::size_t total_epochs)
    : base_lr_(base_lr), start_(start_factor), end_(end_factor), total_(total_epochs) {
    if (!(base_lr > 0.0)) throw ConfigError("trainer.learning_rate must be > 0");
    if (!(start_factor > 0.0) || !(end_factor > 0.0)) throw ConfigError("schedule factors must be > 0");
}

double LinearSchedule::at(std::size_t epoch) const {
    if (total_ <= 1 || epoch >= total_) return base_lr_ * (total_ <= 1 ? start_ : end_);
    const double frac = static_cast<double>(epoch) / static_cast<double>(total_ - 1);
    return base_lr_ * (start_ + (end_ - start_) * frac);
}

double clip_global_norm(const std::vector<TensorView>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (const auto& g : grads)
            for (double& v : g.values) v *= s;
    }
    return norm;
}

}  // namespace ssn
