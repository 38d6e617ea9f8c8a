// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include "oracles.hpp"
#include "qa_fixtures.hpp"

#include "ssn/augmentation.hpp"
#include "ssn/config.hpp"
#include "ssn/losses.hpp"
#include "ssn/metrics.hpp"
#include "ssn/pipeline.hpp"
#include "ssn/ssl_trainer.hpp"
#include "ssn/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#ifndef SSN_SOURCE_DIR
#error "SSN_SOURCE_DIR must point at the source tree"
#endif

using namespace ssn;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << std::fixed << v;
    return s.str();
}

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

// 1. consistency, diversity, score, micro P/R/F1 and micro AUC against brute force.
Outcome equation_oracles() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst_exact = 0.0, worst_auc = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t n = 5 + rng() % 46;  // <= 50 samples
        const std::size_t d = 2 + rng() % 15;  // <= 16 dims
        const std::size_t C = 3;
        Eigen::MatrixXd emb(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        std::vector<LabelVector> labels;
        std::vector<std::vector<int>> label_ints;
        std::vector<Eigen::VectorXd> rows;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) emb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(rng);
            LabelVector l(C);
            for (std::size_t c = 0; c < C; ++c) l.set(c, u(rng) < 0.5);
            labels.push_back(l);
            label_ints.push_back(l.to_ints());
            rows.push_back(emb.row(static_cast<Eigen::Index>(i)).transpose());
        }
        const LabeledIndex index(emb, labels);
        const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 10);
        const double delta = u(rng);
        for (int q = 0; q < 5; ++q) {
            Eigen::VectorXd query(static_cast<Eigen::Index>(d));
            for (auto& v : query) v = g(rng);
            const auto claimed = labels[rng() % n];
            const auto nn = index.nearest(l2_normalized(query), k);
            const auto want = oracle::knn(query, rows, k);
            const double c_got = consistency(claimed, nn, index);
            const double d_got = diversity(nn);
            std::vector<AugCandidate> cand(1);
            cand[0].consistency = c_got;
            cand[0].diversity = d_got;
            apply_selection(cand, delta, 0.5);
            const double c_want = oracle::consistency(claimed.to_ints(), label_ints, want);
            const double d_want = oracle::diversity(want);
            worst_exact = std::max({worst_exact, std::abs(c_got - c_want), std::abs(d_got - d_want),
                                    std::abs(cand[0].score - oracle::score(c_want, d_want, delta))});
        }

        std::vector<LabelVector> truth, pred;
        std::vector<std::vector<int>> ti, pi;
        Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(C));
        std::vector<int> flat_t;
        std::vector<double> flat_s;
        const bool coarse = inst % 2 == 0;  // half the instances carry score ties
        for (std::size_t i = 0; i < n; ++i) {
            LabelVector a(C), b(C);
            for (std::size_t c = 0; c < C; ++c) {
                a.set(c, u(rng) < 0.4);
                double s = u(rng);
                if (coarse) s = std::round(s * 8) / 8;
                scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = s;
                b.set(c, s >= 0.5);
                flat_t.push_back(a[c] ? 1 : 0);
                flat_s.push_back(s);
            }
            truth.push_back(a);
            pred.push_back(b);
            ti.push_back(a.to_ints());
            pi.push_back(b.to_ints());
        }
        const auto got = micro_prf(confusion(truth, pred));
        const auto want = oracle::micro_prf(ti, pi);
        worst_exact = std::max({worst_exact, std::abs(got.precision - want.p), std::abs(got.recall - want.r),
                                std::abs(got.f1 - want.f1)});
        const auto pos = std::count(flat_t.begin(), flat_t.end(), 1);
        if (pos > 0 && pos < static_cast<long>(flat_t.size()))
            worst_auc = std::max(worst_auc, std::abs(micro_auc(truth, scores) - oracle::pair_auc(flat_t, flat_s)));
    }
    const double secs = seconds_since(t0);
    return {worst_exact <= 1e-9 && worst_auc <= 1e-6 && secs < 30.0,
            "max |err| " + sci(worst_exact) + " (tol 1e-9), AUC " + sci(worst_auc) + " (tol 1e-6), " + fmt(secs, 2) +
                " s"};
}

// 2. Total-loss gradient vs central differences on the tiny model.
Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    const auto c = fixture::tiny_qa_config();
    TrainConfig train;
    train.weights = {1.0, 0.8, 0.6};
    double worst = 0.0;
    int points = 0, skipped = 0;
    while (points < 20 && skipped < 200) {
        std::vector<EncodedSample> samples;
        for (int i = 0; i < 4; ++i) samples.push_back(fixture::random_encoded(c, 1 + rng() % 2, rng, i != 3));
        const auto p = fixture::random_params(c, rng);
        bool near_kink = false;
        for (const auto& s : samples) near_kink = near_kink || fixture::distance_to_kink(s, p, c, train.prob_clamp) < 1e-6;
        if (near_kink) {
            ++skipped;
            continue;
        }
        std::vector<TrainExample> batch = {
            {&samples[0], Eigen::Vector3d(1, 0, 1), Eigen::Vector3d::Ones(), false},
            {&samples[1], Eigen::Vector3d(0, 1, 0), Eigen::Vector3d::Ones(), false},
            {&samples[2], Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(1, 1, 0), true},
            {&samples[3], Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 1, 1), true},
        };
        worst = std::max(worst, fixture::check_gradient(batch, p, c, train).max_rel_error);
        ++points;
    }
    const double secs = seconds_since(t0);
    return {points == 20 && worst < 1e-4 && secs < 60.0,
            std::to_string(points) + " points (" + std::to_string(skipped) + " near ties skipped), max rel err " +
                sci(worst) + ", " + fmt(secs, 2) + " s"};
}

// 3. Attention weights form a simplex over real answers; padding gets zero.
Outcome attention_simplex() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> g(0.0, 2.0);
    QAModelConfig c;
    c.dim = 8;
    double worst_sum = 0.0;
    bool nonneg = true, zero_pad = true;
    for (int i = 0; i < 1000; ++i) {
        auto p = QAModelParams::zeros(c);
        for (auto& v : p.attn_w.reshaped()) v = g(rng);
        p.attn_b = g(rng);
        const std::size_t K = 1 + rng() % 6;
        const std::size_t real = 1 + rng() % K;
        Eigen::VectorXd q(8);
        for (auto& v : q) v = g(rng);
        std::vector<Eigen::VectorXd> docs;
        for (std::size_t k = 0; k < K; ++k) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(8);
            if (k < real)
                for (auto& v : a) v = g(rng);
            docs.push_back(a);
        }
        const auto r = attention_scores(q, docs, real, p);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = r.weights[static_cast<Eigen::Index>(k)];
            if (k < real) {
                nonneg = nonneg && w >= 0.0;
                sum += w;
            } else {
                zero_pad = zero_pad && w == 0.0;
            }
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    return {nonneg && zero_pad && worst_sum <= 1e-6,
            "1000 inputs, max |sum - 1| " + sci(worst_sum) + ", nonnegative " + (nonneg ? "yes" : "no") +
                ", padded weights zero " + (zero_pad ? "yes" : "no")};
}

// 4. Quality loss is zero iff every flagged best answer holds the max weight.
Outcome quality_characterization() {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t zero_cases = 0, positive_cases = 0, violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t batch = 1 + rng() % 4;
        std::vector<Eigen::VectorXd> weights;
        std::vector<std::optional<std::size_t>> best;
        bool all_best_max = true;
        for (std::size_t s = 0; s < batch; ++s) {
            const std::size_t K = 1 + rng() % 5;
            Eigen::VectorXd z(static_cast<Eigen::Index>(K));
            for (auto& v : z) v = g(rng);
            std::optional<std::size_t> b;
            if (u(rng) < 0.8) {
                b = rng() % K;
                // Bias toward configurations where the best answer holds the max, including exact ties.
                const double roll = u(rng);
                if (roll < 0.35) z[static_cast<Eigen::Index>(*b)] = z.maxCoeff() + 0.5;
                else if (roll < 0.5) z[static_cast<Eigen::Index>(*b)] = z.maxCoeff();
            }
            Eigen::VectorXd w = (z.array() - z.maxCoeff()).exp();
            w /= w.sum();
            if (b && w[static_cast<Eigen::Index>(*b)] < w.maxCoeff()) all_best_max = false;
            weights.push_back(w);
            best.push_back(b);
        }
        const double loss = quality_loss(weights, best);
        if (all_best_max) {
            ++zero_cases;
            violations += loss == 0.0 ? 0 : 1;
        } else {
            ++positive_cases;
            violations += loss > 0.0 ? 0 : 1;
        }
    }
    return {violations == 0 && zero_cases > 0 && positive_cases > 0,
            std::to_string(zero_cases) + " zero-loss and " + std::to_string(positive_cases) +
                " positive-loss configurations, " + std::to_string(violations) + " violations"};
}

// 5. Pseudo-label filter against the brute-force rule.
Outcome pseudo_filter() {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
    auto unlabeled = [](std::size_t n) {
        std::vector<Sample> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i].id = "u" + std::to_string(i);
            s[i].question = "question";
            s[i].answers = {{"answer", true}};
        }
        return Dataset(DatasetKind::Unlabeled, std::move(s));
    };
    std::size_t mismatches = 0, admitted_at_one = 0, missing_near_half = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 50;
        const auto data = unlabeled(n);
        Eigen::MatrixXd p(static_cast<Eigen::Index>(n), 3);
        for (auto& v : p.reshaped()) v = u(rng);
        const double tau = std::min(1.0, 0.5 + 1e-9 + 0.5 * u(rng));
        const auto got = pseudo_from_probabilities(data, p, tau);
        std::size_t j = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto want = oracle::pseudo_rule({p(static_cast<Eigen::Index>(i), 0), p(static_cast<Eigen::Index>(i), 1),
                                                   p(static_cast<Eigen::Index>(i), 2)},
                                                  tau);
            if (!want.kept) continue;
            if (j >= got.dataset.size() || got.source[j] != i || got.dataset[j].label->to_ints() != want.label ||
                std::vector<int>(got.dataset[j].label_mask->begin(), got.dataset[j].label_mask->end()) != want.mask)
                ++mismatches;
            ++j;
        }
        if (j != got.dataset.size()) ++mismatches;
        admitted_at_one += pseudo_from_probabilities(data, p, 1.0).dataset.size();
        const auto half = pseudo_from_probabilities(data, p, 0.5 + 1e-12);
        for (const auto& s : half.dataset)
            for (auto m : *s.label_mask) missing_near_half += m == 1 ? 0 : 1;
        missing_near_half += n - half.dataset.size();
    }

    // predict_pseudo on a real model equals the rule applied to its probabilities.
    std::mt19937_64 mrng(55);
    const auto c = fixture::tiny_qa_config();
    const auto params = fixture::random_params(c, mrng, 1.0);
    std::vector<Sample> samples;
    std::vector<EncodedSample> encoded;
    for (int i = 0; i < 40; ++i) {
        Sample s;
        s.id = "m" + std::to_string(i);
        s.question = "q";
        s.answers = {{"a", true}};
        samples.push_back(s);
        encoded.push_back(fixture::random_encoded(c, 1, mrng));
    }
    const EncodedDataset enc{Dataset(DatasetKind::Unlabeled, samples), encoded};
    const auto probs = predict_probabilities(params, c, encoded);
    for (double tau : {0.6, 0.8, 0.95}) {
        const auto got = predict_pseudo(params, c, enc, tau);
        std::size_t kept = 0;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) kept += oracle::pseudo_rule({probs(i, 0), probs(i, 1), probs(i, 2)}, tau).kept;
        if (got.dataset.size() != kept) ++mismatches;
    }
    return {mismatches == 0 && admitted_at_one == 0 && missing_near_half == 0,
            "200 random matrices: " + std::to_string(mismatches) + " mismatches, tau = 1 admitted " +
                std::to_string(admitted_at_one) + ", tau = 0.5+ left out " + std::to_string(missing_near_half) +
                " classes"};
}

// 6. |D_a*| non-increasing in eta; delta = 1 and delta = 0 reduce to the components.
Outcome selection_monotonicity() {
    SyntheticConfig sc;
    const auto corpus = make_synthetic_corpus(sc);
    AugmentConfig ac;
    ac.batches = 30;
    ac.samples_per_batch = 20;
    StubLlmClient client({0.15, 6});
    auto gen = generate_candidates(client, corpus.labeled, ac);
    if (gen.candidates.size() < 500)
        return {false, "stub produced only " + std::to_string(gen.candidates.size()) + " candidates"};
    gen.candidates.resize(500);
    HashingEncoder enc(128);
    const LabeledIndex index(corpus.labeled, enc);
    SelectionConfig sel;
    score_candidates(gen.candidates, index, enc, sel);
    auto cands = gen.candidates;

    std::vector<double> etas;
    for (int i = 0; i <= 100; ++i) etas.push_back(i / 100.0);
    bool monotone = true;
    for (double delta : {0.0, 0.4, 1.0}) {
        const auto sweep = eta_sweep(cands, delta, etas);
        for (std::size_t i = 1; i < sweep.size(); ++i) monotone = monotone && sweep[i].kept <= sweep[i - 1].kept;
    }
    const auto sweep = eta_sweep(cands, sel.delta, etas);

    auto order = [&](auto key) {
        std::vector<std::size_t> idx(cands.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(cands[a]) > key(cands[b]); });
        return idx;
    };
    apply_selection(cands, 1.0, sel.eta);
    const bool by_consistency =
        order([](const AugCandidate& x) { return x.score; }) == order([](const AugCandidate& x) { return x.consistency; });
    apply_selection(cands, 0.0, sel.eta);
    const bool by_diversity =
        order([](const AugCandidate& x) { return x.score; }) == order([](const AugCandidate& x) { return x.diversity; });
    return {monotone && by_consistency && by_diversity,
            "500 candidates, kept " + std::to_string(sweep.front().kept) + " at eta 0 down to " +
                std::to_string(sweep.back().kept) + " at eta 1, delta 1 = consistency order " +
                (by_consistency ? "yes" : "no") + ", delta 0 = diversity order " + (by_diversity ? "yes" : "no")};
}

// 7. Interaction feature length is |kernels| * F * P^2 for every sentence count.
Outcome shape_invariance() {
    QAModelConfig c;
    c.dim = 32;
    const std::size_t expected = c.kernels.size() * c.filters * c.pool * c.pool;
    HashingEncoder enc(c.dim);
    const auto p = QAModelParams::init(c, 7);
    auto text = [](const std::string& stem, std::size_t n) {
        std::string t;
        for (std::size_t i = 0; i < n; ++i) t += stem + " number " + std::to_string(i) + ". ";
        return t;
    };
    std::size_t combos = 0, bad = 0;
    for (std::size_t i = 1; i <= c.max_q_sentences; ++i)
        for (std::size_t j = 1; j <= c.max_a_sentences; ++j) {
            Sample s;
            s.id = "s";
            s.question = text("question sentence", i);
            s.answers = {{text("answer sentence", j), true}};
            const auto e = encode_sample(enc, s, c.encoding_shape());
            const auto t = forward(e, p, c);
            bad += (e.q_sent_count == i && e.a_sent_count[0] == j &&
                    static_cast<std::size_t>(t.interaction[0].size()) == expected &&
                    static_cast<std::size_t>(t.concat.size()) == c.concat_width())
                       ? 0
                       : 1;
            ++combos;
        }
    return {expected == 512 && bad == 0,
            "length " + std::to_string(expected) + " over " + std::to_string(combos) + " (m, n) combinations, " +
                std::to_string(bad) + " mismatches"};
}

struct VariantResult {
    Metrics metrics;
    std::string report;
    double seconds;
};

struct SmokeRun {
    RunConfig config;
    SyntheticCorpus corpus;
    std::size_t minority;
};

SmokeRun smoke_setup() {
    ConfigSources src;
    src.file = std::string(SSN_SOURCE_DIR) + "/configs/smoke.json";
    src.use_environment = false;
    auto config = load_config(src);
    config.validate();
    auto corpus = make_synthetic_corpus(config.synth);
    const auto minority = minority_class(corpus.labeled);
    return {std::move(config), std::move(corpus), minority};
}

VariantResult run_variant(const SmokeRun& s, bool self_training, bool augmentation) {
    const auto t0 = Clock::now();
    const auto encoder = make_encoder(s.config.encoder);
    const auto client = make_llm_client(s.config);
    PipelineOptions opt;
    opt.self_training = self_training;
    opt.augmentation = augmentation;
    const auto result = run_pipeline(s.config, s.corpus.labeled, &s.corpus.unlabeled, *encoder, client.get(), opt);
    MetricsReport report;
    report.class_names = s.config.classes;
    report.folds.push_back(evaluate_q(result.q, s.config, s.corpus.test));
    report.note = "held-out synthetic test set";
    return {report.folds[0], report.to_json().dump(2), seconds_since(t0)};
}

std::optional<VariantResult> g_full;

// 8. End-to-end smoke run of three variants.
Outcome end_to_end() {
    const auto s = smoke_setup();
    const auto sup = run_variant(s, false, false);
    const auto ssl = run_variant(s, true, false);
    g_full = run_variant(s, true, true);
    const auto& full = g_full->metrics;
    const double r_ssl = ssl.metrics.per_class[s.minority].prf.recall;
    const double r_full = full.per_class[s.minority].prf.recall;
    const bool time_ok = g_full->seconds < 300.0;
    const bool f1_ok = full.micro.f1 >= 0.85;
    const bool vs_sup = full.micro.f1 >= sup.metrics.micro.f1 - 0.02;
    const bool minority_ok = r_full >= r_ssl;
    std::ostringstream d;
    d << "full pipeline " << fmt(g_full->seconds, 1) << " s (limit 300), micro-F1 full " << fmt(full.micro.f1)
      << " / ssl " << fmt(ssl.metrics.micro.f1) << " / supervised " << fmt(sup.metrics.micro.f1)
      << ", minority (" << s.config.classes[s.minority] << ") recall with augmentation " << fmt(r_full)
      << " vs without " << fmt(r_ssl);
    return {time_ok && f1_ok && vs_sup && minority_ok, d.str()};
}

// 9. A second full run with the same seeds gives a byte-identical report.
Outcome determinism() {
    if (!g_full) return {false, "criterion 8 did not produce a report"};
    const auto s = smoke_setup();
    const auto again = run_variant(s, true, true);
    const bool same = again.report == g_full->report;
    return {same, std::string("reports ") + (same ? "identical" : "differ") + " (" +
                      std::to_string(again.report.size()) + " bytes)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"equation oracles", equation_oracles},
        {"gradient check", gradient_check},
        {"attention simplex", attention_simplex},
        {"quality-loss characterization", quality_characterization},
        {"pseudo-label filter", pseudo_filter},
        {"selection monotonicity", selection_monotonicity},
        {"shape invariance", shape_invariance},
        {"end-to-end smoke", end_to_end},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
                  << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
