#include "ssn/errors.hpp"
#include "ssn/metrics.hpp"
#include "ssn/q_model.hpp"
#include "ssn/synthetic.hpp"

#include <doctest.h>

#include <random>

using namespace ssn;

namespace {

QModelConfig tiny_q() {
    QModelConfig c;
    c.vocab_buckets = 31;
    c.embed_dim = 4;
    c.hidden = 3;
    c.max_tokens = 6;
    c.dropout = 0.0;
    return c;
}

}  // namespace

TEST_CASE("token ids are bucketed and truncated") {
    auto c = tiny_q();
    const auto ids = token_ids("one two three four five six seven eight", c);
    CHECK(ids.size() == 6);
    for (auto id : ids) CHECK(id < 31);
    CHECK(token_ids("One, TWO", c) == token_ids("one two", c));
    CHECK_THROWS_AS(token_ids("?!", c), DataError);
}

TEST_CASE("prediction shape and thresholding") {
    auto c = tiny_q();
    const auto p = QModelParams::init(c, 2);
    const auto r = predict_q(p, c, "where can I get advice");
    CHECK(r.probs.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(r.label[k] == (r.probs[static_cast<Eigen::Index>(k)] >= c.threshold));
    const std::vector<std::string> texts = {"a b", "c d e"};
    CHECK(predict_q_batch(p, c, texts).rows() == 2);
}

TEST_CASE("Q-model gradient matches finite differences") {
    auto c = tiny_q();
    std::mt19937_64 rng(6);
    auto p = QModelParams::init(c, 4);
    std::normal_distribution<double> g(0.0, 0.4);
    for (auto& t : p.tensors())
        for (auto& v : t.values) v = g(rng);
    std::vector<std::vector<std::size_t>> tokens = {{1, 5, 9}, {2, 2, 30, 7, 0}};
    Eigen::MatrixXd y(2, 3);
    y << 1, 0, 1, 0, 1, 0;
    auto grads = QModelParams::zeros(c);
    (void)q_batch_loss(p, c, tokens, y, kDefaultProbClamp, &grads);
    auto pv = p.tensors();
    auto gv = grads.tensors();
    const double h = 1e-6;
    double worst = 0;
    for (std::size_t t = 0; t < pv.size(); ++t)
        for (std::size_t i = 0; i < pv[t].values.size(); ++i) {
            double& x = pv[t].values[i];
            const double orig = x;
            x = orig + h;
            const double up = q_batch_loss(p, c, tokens, y, kDefaultProbClamp);
            x = orig - h;
            const double down = q_batch_loss(p, c, tokens, y, kDefaultProbClamp);
            x = orig;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(fd - gv[t].values[i]) / std::max({std::abs(fd), std::abs(gv[t].values[i]), 1e-6}));
        }
    CHECK(worst < 1e-4);
}

TEST_CASE("question-only classifier learns the synthetic corpus") {
    SyntheticConfig sc;
    sc.labeled = 200;
    sc.test = 200;
    const auto corpus = make_synthetic_corpus(sc);
    std::vector<Sample> fused;
    for (const auto& s : corpus.labeled) {
        Sample f;
        f.id = s.id;
        f.question = s.question;
        f.label = s.label;
        fused.push_back(std::move(f));
    }
    QModelConfig c;
    c.hidden = 32;
    QTrainConfig t;
    t.max_epochs = 15;
    std::size_t epochs = 0;
    const auto params = train_q(Dataset(DatasetKind::Fused, std::move(fused)), c, t,
                                [&](const QEpochRecord&) { ++epochs; });
    CHECK(epochs >= t.min_epochs);
    std::vector<LabelVector> truth;
    std::vector<std::string> texts;
    for (const auto& s : corpus.test) {
        truth.push_back(*s.label);
        texts.push_back(s.question);
    }
    const std::vector<std::string> names = {"a", "b", "c"};
    const auto m = evaluate_scores(truth, predict_q_batch(params, c, texts), names);
    CHECK(m.micro.f1 >= 0.85);
}

TEST_CASE("Q-model config validation") {
    QModelConfig c;
    c.hidden = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    QTrainConfig t;
    t.learning_rate = -1;
    CHECK_THROWS_AS(t.validate(), ConfigError);
}
