#include "ssn/augmentation.hpp"
#include "ssn/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ssn;

namespace {

void BM_NearestNeighbors(benchmark::State& state) {
    const auto n = state.range(0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::MatrixXd emb(n, 128);
    for (auto& v : emb.reshaped()) v = g(rng);
    std::vector<LabelVector> labels(static_cast<std::size_t>(n), LabelVector{1, 0, 0});
    const LabeledIndex index(emb, labels);
    Eigen::VectorXd q(128);
    for (auto& v : q) v = g(rng);
    q = l2_normalized(q);
    for (auto _ : state) benchmark::DoNotOptimize(index.nearest(q, 5));
}
BENCHMARK(BM_NearestNeighbors)->Arg(200)->Arg(2000);

void BM_EtaSweep(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    std::vector<AugCandidate> cands(static_cast<std::size_t>(state.range(0)));
    for (auto& c : cands) {
        c.consistency = u(rng);
        c.diversity = u(rng);
    }
    std::vector<double> etas;
    for (int i = 0; i <= 20; ++i) etas.push_back(i * 0.05);
    for (auto _ : state) benchmark::DoNotOptimize(eta_sweep(cands, 0.4, etas));
}
BENCHMARK(BM_EtaSweep)->Arg(500)->Arg(5000);

void BM_MicroAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u;
    std::vector<LabelVector> truth;
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        LabelVector l(3);
        for (std::size_t c = 0; c < 3; ++c) {
            l.set(c, u(rng) < 0.4);
            scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = u(rng);
        }
        truth.push_back(l);
    }
    for (auto _ : state) benchmark::DoNotOptimize(micro_auc(truth, scores));
}
BENCHMARK(BM_MicroAuc)->Arg(400)->Arg(4000);

}  // namespace
