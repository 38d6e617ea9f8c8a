#include "ssn/encoder.hpp"
#include "ssn/q_model.hpp"
#include "ssn/qa_model.hpp"
#include "ssn/ssl_trainer.hpp"
#include "ssn/synthetic.hpp"

#include <benchmark/benchmark.h>

using namespace ssn;

namespace {

const SyntheticCorpus& corpus() {
    static const SyntheticCorpus c = [] {
        SyntheticConfig sc;
        sc.labeled = 64;
        sc.unlabeled = 16;
        sc.test = 16;
        return make_synthetic_corpus(sc);
    }();
    return c;
}

void BM_HashingEncoder(benchmark::State& state) {
    HashingEncoder enc(static_cast<std::size_t>(state.range(0)));
    const std::string text = corpus().labeled[0].question;
    for (auto _ : state) benchmark::DoNotOptimize(enc.encode_one(text));
}
BENCHMARK(BM_HashingEncoder)->Arg(128)->Arg(512);

void BM_EncodeSample(benchmark::State& state) {
    QAModelConfig c;
    c.dim = static_cast<std::size_t>(state.range(0));
    HashingEncoder enc(c.dim);
    for (auto _ : state) benchmark::DoNotOptimize(encode_sample(enc, corpus().labeled[1], c.encoding_shape()));
}
BENCHMARK(BM_EncodeSample)->Arg(128)->Arg(512);

void BM_InteractionFeatures(benchmark::State& state) {
    QAModelConfig c;
    c.dim = static_cast<std::size_t>(state.range(0));
    const auto p = QAModelParams::init(c, 1);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(c.max_q_sentences), static_cast<Eigen::Index>(c.dim));
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(c.max_a_sentences), static_cast<Eigen::Index>(c.dim));
    for (auto _ : state) benchmark::DoNotOptimize(interaction_features(q, a, p, c));
}
BENCHMARK(BM_InteractionFeatures)->Arg(128)->Arg(512);

void BM_InteractionGridReference(benchmark::State& state) {
    QAModelConfig c;
    c.dim = static_cast<std::size_t>(state.range(0));
    const auto p = QAModelParams::init(c, 1);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(c.max_q_sentences), static_cast<Eigen::Index>(c.dim));
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(c.max_a_sentences), static_cast<Eigen::Index>(c.dim));
    for (auto _ : state) benchmark::DoNotOptimize(apply_interaction_kernels(build_interaction_matrix(q, a), p, c));
}
BENCHMARK(BM_InteractionGridReference)->Arg(128);

void BM_QABatchLossBackward(benchmark::State& state) {
    QAModelConfig c;
    c.dim = static_cast<std::size_t>(state.range(0));
    HashingEncoder enc(c.dim);
    const auto data = encode_dataset(enc, corpus().labeled, c.encoding_shape());
    const auto p = QAModelParams::init(c, 2);
    TrainConfig train;
    std::vector<TrainExample> batch;
    for (std::size_t i = 0; i < 32; ++i) {
        const auto& s = corpus().labeled[i];
        Eigen::VectorXd y(3);
        for (std::size_t k = 0; k < 3; ++k) y[static_cast<Eigen::Index>(k)] = (*s.label)[k] ? 1.0 : 0.0;
        batch.push_back({&data.encoded[i], y, Eigen::VectorXd::Ones(3), false});
    }
    for (auto _ : state) {
        auto grads = QAModelParams::zeros(c);
        benchmark::DoNotOptimize(batch_loss(batch, p, c, train, &grads));
    }
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_QABatchLossBackward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_QModelPredict(benchmark::State& state) {
    QModelConfig c;
    c.hidden = static_cast<std::size_t>(state.range(0));
    const auto p = QModelParams::init(c, 3);
    const std::string text = corpus().labeled[2].question;
    for (auto _ : state) benchmark::DoNotOptimize(predict_q(p, c, text));
}
BENCHMARK(BM_QModelPredict)->Arg(64)->Arg(256);

}  // namespace
