#pragma once

#include "ssn/tensor.hpp"

#include <cstddef>
#include <vector>

namespace ssn {

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adaptive-moment optimizer. Moment buffers are matched to tensors by
// position, so every step must pass the tensors in the same order.
class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    double learning_rate() const { return config_.learning_rate; }
    std::size_t steps() const { return step_; }

    void step(const std::vector<TensorView>& params, const std::vector<ConstTensorView>& grads);

private:
    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Linear learning-rate schedule: the multiplier moves from start_factor to
// end_factor over `total_epochs`, then stays at end_factor.
class LinearSchedule {
public:
    LinearSchedule(double base_lr, double start_factor, double end_factor, std::size_t total_epochs);
    double at(std::size_t epoch) const;

private:
    double base_lr_, start_, end_;
    std::size_t total_;
};

// Scales gradients in place so their global L2 norm is at most max_norm.
// Returns the pre-clipping norm. max_norm <= 0 disables clipping.
double clip_global_norm(const std::vector<TensorView>& grads, double max_norm);

}  // namespace ssn
