#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssn {

// Named, flat view of one parameter tensor. Shape is kept for serialization
// only; optimizers and gradient checks treat every tensor as a flat span.
struct TensorView {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<double> values;
};

struct ConstTensorView {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const double> values;
};

inline TensorView view_of(std::string name, Eigen::MatrixXd& m) {
    return {std::move(name), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
            {m.data(), static_cast<std::size_t>(m.size())}};
}

inline TensorView view_of(std::string name, Eigen::VectorXd& v) {
    return {std::move(name), static_cast<std::size_t>(v.size()), 1, {v.data(), static_cast<std::size_t>(v.size())}};
}

inline TensorView view_of(std::string name, double& scalar) { return {std::move(name), 1, 1, {&scalar, 1}}; }

inline ConstTensorView as_const(const TensorView& t) { return {t.name, t.rows, t.cols, t.values}; }

inline std::size_t parameter_count(const std::vector<TensorView>& tensors) {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
}

}  // namespace ssn
