#pragma once

// Independent reference implementations used by unit and acceptance tests.
// Written from the definitions with plain loops; none of them call into the
// library code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double dot = 0, na = 0, nb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// k most similar rows by cosine, ties to the lower index. Full sort, no heap.
inline std::vector<std::pair<std::size_t, double>> knn(const Eigen::VectorXd& query,
                                                       const std::vector<Eigen::VectorXd>& rows, std::size_t k) {
    std::vector<std::pair<std::size_t, double>> all;
    for (std::size_t i = 0; i < rows.size(); ++i) all.emplace_back(i, cosine(query, rows[i]));
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    all.resize(k);
    return all;
}

inline double consistency(const std::vector<int>& claimed, const std::vector<std::vector<int>>& labels,
                          const std::vector<std::pair<std::size_t, double>>& nn) {
    std::size_t same = 0;
    for (const auto& [i, s] : nn) same += labels[i] == claimed ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(nn.size());
}

inline double diversity(const std::vector<std::pair<std::size_t, double>>& nn) {
    double sum = 0;
    for (const auto& [i, s] : nn) sum += s;
    return 1.0 - sum / static_cast<double>(nn.size());
}

inline double score(double c, double d, double delta) { return delta * c + (1.0 - delta) * d; }

struct Prf {
    double p, r, f1;
};

// Micro precision, recall and F1 by counting every (sample, class) decision.
inline Prf micro_prf(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t c = 0; c < truth[i].size(); ++c) {
            if (truth[i][c] && pred[i][c]) tp += 1;
            if (!truth[i][c] && pred[i][c]) fp += 1;
            if (truth[i][c] && !pred[i][c]) fn += 1;
        }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

// Probability that a random positive outscores a random negative, ties 1/2,
// by enumerating every pair.
inline double pair_auc(const std::vector<int>& truth, const std::vector<double>& scores) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!truth[i]) continue;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (truth[j]) continue;
            pairs += 1;
            if (scores[i] > scores[j]) wins += 1;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

// Valid 2D convolution of one filter over the concatenated-channel grid.
// weight(col) indexing: (a * kc + b) * 2d + ch.
inline Eigen::MatrixXd conv2d(const Eigen::MatrixXd& q, const Eigen::MatrixXd& a, const Eigen::RowVectorXd& weight,
                              double bias, std::size_t kr, std::size_t kc) {
    const auto m = static_cast<std::size_t>(q.rows()), n = static_cast<std::size_t>(a.rows());
    const auto d = static_cast<std::size_t>(q.cols());
    Eigen::MatrixXd out(m - kr + 1, n - kc + 1);
    for (std::size_t r = 0; r + kr <= m; ++r)
        for (std::size_t c = 0; c + kc <= n; ++c) {
            double acc = bias;
            for (std::size_t x = 0; x < kr; ++x)
                for (std::size_t y = 0; y < kc; ++y) {
                    const std::size_t base = (x * kc + y) * 2 * d;
                    for (std::size_t ch = 0; ch < d; ++ch) {
                        acc += weight[static_cast<Eigen::Index>(base + ch)] * q(r + x, ch);
                        acc += weight[static_cast<Eigen::Index>(base + d + ch)] * a(c + y, ch);
                    }
                }
            out(r, c) = acc;
        }
    return out;
}

inline std::pair<std::size_t, std::size_t> pool_window(std::size_t o, std::size_t in, std::size_t out) {
    const std::size_t begin = o * in / out;
    const std::size_t end = ((o + 1) * in + out - 1) / out;
    return {begin, end};
}

inline Eigen::MatrixXd max_pool(const Eigen::MatrixXd& x, std::size_t P) {
    Eigen::MatrixXd out(P, P);
    for (std::size_t i = 0; i < P; ++i)
        for (std::size_t j = 0; j < P; ++j) {
            const auto [r0, r1] = pool_window(i, static_cast<std::size_t>(x.rows()), P);
            const auto [c0, c1] = pool_window(j, static_cast<std::size_t>(x.cols()), P);
            double best = -std::numeric_limits<double>::infinity();
            for (auto r = r0; r < r1; ++r)
                for (auto c = c0; c < c1; ++c) best = std::max(best, x(r, c));
            out(i, j) = best;
        }
    return out;
}

// Smallest gap between the two largest values of any pool window with more
// than one cell; +inf when every window is a single cell.
inline double min_pool_gap(const Eigen::MatrixXd& x, std::size_t P) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < P; ++i)
        for (std::size_t j = 0; j < P; ++j) {
            const auto [r0, r1] = pool_window(i, static_cast<std::size_t>(x.rows()), P);
            const auto [c0, c1] = pool_window(j, static_cast<std::size_t>(x.cols()), P);
            std::vector<double> v;
            for (auto r = r0; r < r1; ++r)
                for (auto c = c0; c < c1; ++c) v.push_back(x(r, c));
            // Exactly equal values come from all-padding cells and select the
            // same gradient, so only distinct values count as a tie.
            std::sort(v.rbegin(), v.rend());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            if (v.size() < 2) continue;
            gap = std::min(gap, v[0] - v[1]);
        }
    return gap;
}

// Per-class pseudo-label rule: confident iff max(p, 1 - p) >= tau, label [p >= tau].
struct PseudoRow {
    std::vector<int> label;
    std::vector<int> mask;
    bool kept;
};
inline PseudoRow pseudo_rule(const std::vector<double>& p, double tau) {
    PseudoRow row{{}, {}, false};
    for (double v : p) {
        const bool confident = std::max(v, 1.0 - v) >= tau;
        row.mask.push_back(confident ? 1 : 0);
        row.label.push_back(confident && v >= tau ? 1 : 0);
        row.kept = row.kept || confident;
    }
    return row;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ssn-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
