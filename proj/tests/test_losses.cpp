#include "ssn/errors.hpp"
#include "ssn/losses.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ssn;

TEST_CASE("label loss worked example") {
    Eigen::MatrixXd y(1, 3), p(1, 3);
    y << 1, 0, 0;
    p << 0.8, 0.3, 0.3;
    const double want = -(std::log(0.8) + std::log(0.7) + std::log(0.7));
    CHECK(label_loss(y, p) == doctest::Approx(want).epsilon(1e-12));
    CHECK(want == doctest::Approx(0.9365).epsilon(1e-4));
}

TEST_CASE("label loss at p = 0.5 everywhere is |C| ln 2") {
    Eigen::MatrixXd y(2, 3), p = Eigen::MatrixXd::Constant(2, 3, 0.5);
    y << 1, 0, 1, 0, 1, 0;
    CHECK(label_loss(y, p) == doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("label loss clamps probabilities and handles empty batches") {
    Eigen::MatrixXd y(1, 1), p(1, 1);
    y << 1;
    p << 0.0;
    CHECK(std::isfinite(label_loss(y, p)));
    CHECK(label_loss_grad(y, p)(0, 0) == 0.0);
    CHECK(label_loss(Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3)) == 0.0);
}

TEST_CASE("pseudo gate is symmetric in confidence") {
    Eigen::MatrixXd p(1, 3);
    p << 0.95, 0.05, 0.6;
    const auto t = pseudo_targets(p, 0.9);
    CHECK(t.mask(0, 0) == 1);
    CHECK(t.targets(0, 0) == 1);
    CHECK(t.mask(0, 1) == 1);
    CHECK(t.targets(0, 1) == 0);
    CHECK(t.mask(0, 2) == 0);
    Eigen::MatrixXd one(1, 1);
    one << 0.95;
    CHECK(unlabeled_loss(one, 0.9) == doctest::Approx(-std::log(0.95)));
    one << 0.05;
    CHECK(unlabeled_loss(one, 0.9) == doctest::Approx(-std::log(0.95)));
}

TEST_CASE("tau outside (0.5, 1] is a config error") {
    CHECK_THROWS_AS(validate_tau(0.5), ConfigError);
    CHECK_THROWS_AS(validate_tau(0.4), ConfigError);
    CHECK_THROWS_AS(validate_tau(1.01), ConfigError);
    CHECK_NOTHROW(validate_tau(1.0));
}

TEST_CASE("quality loss worked examples") {
    std::vector<Eigen::VectorXd> w = {Eigen::Vector3d(0.2, 0.5, 0.3)};
    std::vector<std::optional<std::size_t>> best = {0};
    CHECK(quality_loss(w, best) == doctest::Approx(0.09).epsilon(1e-12));
    best = {1};
    CHECK(quality_loss(w, best) == 0.0);
    best = {std::nullopt};
    CHECK(quality_loss(w, best) == 0.0);
}

TEST_CASE("quality loss averages over every sample") {
    std::vector<Eigen::VectorXd> w = {Eigen::Vector2d(0.4, 0.6), Eigen::Vector2d(0.5, 0.5)};
    std::vector<std::optional<std::size_t>> best = {0, std::nullopt};
    CHECK(quality_loss(w, best) == doctest::Approx(0.04 / 2));
}

TEST_CASE("total loss weighting") {
    const auto t = total_loss(2, 4, 10, {1.0, 0.5, 0.1});
    CHECK(t.total == doctest::Approx(5.0));
    CHECK(t.label_term == 2);
    CHECK(t.unlabel_term == 4);
    CHECK(t.quality_term == 10);
    LossWeights bad{-1, 1, 1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("loss gradients match finite differences") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const double h = 1e-6;
    Eigen::MatrixXd y(4, 3), p(4, 3), mask(4, 3);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) = u(rng) > 0.5;
        p(i) = u(rng);
        mask(i) = u(rng) > 0.3;
    }
    const auto g = label_loss_grad(y, p);
    const auto gm = masked_label_loss_grad(y, mask, p);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Eigen::MatrixXd up = p, down = p;
        up(i) += h;
        down(i) -= h;
        CHECK(g(i) == doctest::Approx((label_loss(y, up) - label_loss(y, down)) / (2 * h)).epsilon(1e-6));
        CHECK(gm(i) == doctest::Approx((masked_label_loss(y, mask, up) - masked_label_loss(y, mask, down)) / (2 * h))
                           .epsilon(1e-6));
    }

    std::vector<Eigen::VectorXd> w = {Eigen::Vector3d(0.2, 0.5, 0.3), Eigen::Vector3d(0.6, 0.1, 0.3)};
    std::vector<std::optional<std::size_t>> best = {2, 1};
    const auto gq = quality_loss_grad(w, best);
    for (std::size_t s = 0; s < 2; ++s)
        for (Eigen::Index j = 0; j < 3; ++j) {
            auto up = w, down = w;
            up[s][j] += h;
            down[s][j] -= h;
            CHECK(gq[s][j] == doctest::Approx((quality_loss(up, best) - quality_loss(down, best)) / (2 * h)).epsilon(1e-6));
        }
}

TEST_CASE("logit-space cross entropy matches the probability form") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 4.0);
    Eigen::MatrixXd z(5, 3), y(5, 3), mask(5, 3);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z(i) = g(rng);
        y(i) = g(rng) > 0.0;
        mask(i) = g(rng) > -2.0;
    }
    z(0, 0) = 30.0;
    z(1, 1) = -30.0;
    const Eigen::MatrixXd p = (1.0 + (-z.array()).exp()).inverse().matrix();
    CHECK(masked_label_loss_logits(y, mask, z) == doctest::Approx(masked_label_loss(y, mask, p)).epsilon(1e-9));
    const auto gz = masked_label_loss_logits_grad(y, mask, z);
    const auto gp = masked_label_loss_grad(y, mask, p);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        CHECK(gz(i) == doctest::Approx(gp(i) * p(i) * (1.0 - p(i))).epsilon(1e-6));
    CHECK(gz(0, 0) == 0.0);
    CHECK(gz(1, 1) == 0.0);
}
