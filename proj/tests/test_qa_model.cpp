#include "oracles.hpp"
#include "qa_fixtures.hpp"

#include "ssn/errors.hpp"
#include "ssn/qa_model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ssn;

TEST_CASE("interaction matrix cell layout") {
    Eigen::MatrixXd q(2, 3), a(3, 3);
    q << 1, 2, 3, 4, 5, 6;
    a << 7, 8, 9, 10, 11, 12, 13, 14, 15;
    const auto g = build_interaction_matrix(q, a);
    CHECK(g.rows() == 2);
    CHECK(g.cols() == 3);
    CHECK(g.channels() == 6);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        CHECK(g.at(0, 1, ch) == q(0, ch));
        CHECK(g.at(0, 1, 3 + ch) == a(1, ch));
    }
}

TEST_CASE("interaction width with the default kernel set is 512") {
    QAModelConfig c;
    CHECK(c.interaction_width() == 4 * 8 * 16);
    CHECK(c.interaction_width() == 512);
}

TEST_CASE("adaptive pool windows") {
    const auto w = adaptive_pool_windows(5, 2);
    REQUIRE(w.size() == 2);
    CHECK(w[0].begin == 0);
    CHECK(w[0].end == 3);
    CHECK(w[1].begin == 2);
    CHECK(w[1].end == 5);
    for (std::size_t in = 1; in <= 9; ++in)
        for (std::size_t out = 1; out <= 5; ++out) {
            const auto ws = adaptive_pool_windows(in, out);
            for (std::size_t o = 0; o < out; ++o) {
                const auto [b, e] = oracle::pool_window(o, in, out);
                CHECK(ws[o].begin == b);
                CHECK(ws[o].end == e);
                CHECK(ws[o].end > ws[o].begin);
            }
        }
}

TEST_CASE("3x3 grid with one 2x2 filter matches the nested-loop oracle") {
    QAModelConfig c;
    c.dim = 2;
    c.max_q_sentences = 3;
    c.max_a_sentences = 3;
    c.kernels = {{2, 2}};
    c.filters = 1;
    c.pool = 2;
    auto p = QAModelParams::zeros(c);
    for (Eigen::Index i = 0; i < p.kernels[0].weight.size(); ++i) p.kernels[0].weight(i) = 0.1 * static_cast<double>(i + 1) * (i % 2 ? -1 : 1);
    p.kernels[0].bias[0] = 0.25;
    Eigen::MatrixXd q(3, 2), a(3, 2);
    q << 1, 0, 0, 1, 1, 1;
    a << 2, -1, 0.5, 0.5, -1, 3;

    const auto conv = oracle::conv2d(q, a, p.kernels[0].weight.row(0), 0.25, 2, 2);
    const auto pooled = oracle::max_pool(conv, 2);
    const auto got = apply_interaction_kernels(build_interaction_matrix(q, a), p, c);
    REQUIRE(got.size() == 4);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(got[i * 2 + j] == doctest::Approx(pooled(i, j)).epsilon(1e-12));
    const auto fast = interaction_features(q, a, p, c);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(fast[i] == doctest::Approx(got[i]).epsilon(1e-12));
}

TEST_CASE("split-channel interaction features equal the explicit grid path") {
    std::mt19937_64 rng(5);
    QAModelConfig c;
    c.dim = 6;
    c.max_q_sentences = 4;
    c.max_a_sentences = 5;
    c.filters = 3;
    c.pool = 3;
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = fixture::random_params(c, rng);
        const auto s = fixture::random_encoded(c, 1, rng);
        const auto a = interaction_features(s.q_sent, s.a_sent[0], p, c);
        const auto b = apply_interaction_kernels(build_interaction_matrix(s.q_sent, s.a_sent[0]), p, c);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("attention on a hand-set d=2 example") {
    QAModelConfig c;
    c.dim = 2;
    auto p = QAModelParams::zeros(c);
    p.attn_w << 1, 0, 0, 2;
    p.attn_b = 0.5;
    Eigen::VectorXd q(2), a1(2), a2(2), pad = Eigen::VectorXd::Zero(2);
    q << 1, 1;
    a1 << 1, 0;
    a2 << 0, 1;
    std::vector<Eigen::VectorXd> docs = {a1, a2, pad};
    const auto r = attention_scores(q, docs, 2, p);
    const double s1 = std::tanh(1.0 + 0.5), s2 = std::tanh(2.0 + 0.5);
    const double z = std::exp(s1) + std::exp(s2);
    CHECK(r.scores[0] == doctest::Approx(s1));
    CHECK(r.scores[1] == doctest::Approx(s2));
    CHECK(r.weights[0] == doctest::Approx(std::exp(s1) / z));
    CHECK(r.weights[1] == doctest::Approx(std::exp(s2) / z));
    CHECK(r.weights[2] == 0.0);
}

TEST_CASE("weighted aggregation") {
    Eigen::VectorXd w(2);
    w << 0.3, 0.7;
    std::vector<Eigen::VectorXd> v = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    const auto out = aggregate_answers(w, v);
    CHECK(out[0] == doctest::Approx(0.3));
    CHECK(out[1] == doctest::Approx(0.7));
}

TEST_CASE("forward output shapes and probability range") {
    std::mt19937_64 rng(9);
    QAModelConfig c;
    c.dim = 16;
    const auto p = QAModelParams::init(c, 3);
    for (std::size_t answers = 1; answers <= c.max_answers; ++answers) {
        const auto s = fixture::random_encoded(c, answers, rng);
        const auto t = forward(s, p, c);
        CHECK(static_cast<std::size_t>(t.concat.size()) == c.concat_width());
        CHECK(t.probs.size() == 3);
        for (double v : t.probs) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        for (std::size_t k = answers; k < c.max_answers; ++k) CHECK(t.attention.weights[static_cast<Eigen::Index>(k)] == 0.0);
    }
}

TEST_CASE("config validation rejects kernels larger than the grid") {
    QAModelConfig c;
    c.max_q_sentences = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("gradient check on the tiny model") {
    std::mt19937_64 rng(17);
    const auto c = fixture::tiny_qa_config();
    TrainConfig train;
    train.weights = {1.0, 0.7, 0.9};
    std::vector<EncodedSample> samples;
    for (int i = 0; i < 4; ++i) samples.push_back(fixture::random_encoded(c, 1 + static_cast<std::size_t>(i % 2), rng));
    std::vector<TrainExample> batch;
    batch.push_back({&samples[0], Eigen::Vector3d(1, 0, 1), Eigen::Vector3d::Ones(), false});
    batch.push_back({&samples[1], Eigen::Vector3d(0, 1, 0), Eigen::Vector3d::Ones(), false});
    batch.push_back({&samples[2], Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(1, 0, 1), true});
    batch.push_back({&samples[3], Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 1, 1), true});
    const auto p = fixture::random_params(c, rng);
    const auto r = fixture::check_gradient(batch, p, c, train);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradient check with multi-cell pool windows") {
    std::mt19937_64 rng(23);
    QAModelConfig c;
    c.dim = 4;
    c.max_q_sentences = 4;
    c.max_a_sentences = 5;
    c.max_answers = 3;
    c.filters = 2;
    c.pool = 2;
    c.dropout = 0.0;
    TrainConfig train;
    std::vector<EncodedSample> samples = {fixture::random_encoded(c, 3, rng), fixture::random_encoded(c, 2, rng)};
    std::vector<TrainExample> batch = {{&samples[0], Eigen::Vector3d(1, 1, 0), Eigen::Vector3d::Ones(), false},
                                       {&samples[1], Eigen::Vector3d(0, 1, 0), Eigen::Vector3d::Ones(), false}};
    int checked = 0;
    for (int trial = 0; trial < 10 && checked < 3; ++trial) {
        const auto p = fixture::random_params(c, rng);
        if (fixture::distance_to_kink(samples[0], p, c, train.prob_clamp) < 1e-4 ||
            fixture::distance_to_kink(samples[1], p, c, train.prob_clamp) < 1e-4)
            continue;
        ++checked;
        CHECK(fixture::check_gradient(batch, p, c, train).max_rel_error < 1e-4);
    }
    CHECK(checked == 3);
}

TEST_CASE("parameter tensors round trip through views") {
    QAModelConfig c;
    c.dim = 8;
    auto p = QAModelParams::init(c, 1);
    auto views = p.tensors();
    CHECK(views.front().name == "kernel0.1x1.weight");
    CHECK(views.back().name == "head.bias");
    CHECK(parameter_count(views) > 0);
    CHECK(p.all_finite());
    views[0].values[0] = std::nan("");
    CHECK_FALSE(p.all_finite());
}
