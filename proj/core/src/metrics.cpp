#include "ssn/metrics.hpp"

#include "ssn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace ssn {

namespace {

double ratio(std::size_t num, std::size_t den, bool& undefined) {
    if (den == 0) {
        undefined = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

PrecisionRecallF1 prf_from(std::size_t tp, std::size_t fp, std::size_t fn) {
    PrecisionRecallF1 out;
    out.precision = ratio(tp, tp + fp, out.undefined);
    out.recall = ratio(tp, tp + fn, out.undefined);
    out.f1 = f1_from(out.precision, out.recall);
    return out;
}

void pool(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores, std::vector<int>& truth,
          std::vector<double>& flat) {
    if (static_cast<std::size_t>(scores.rows()) != y_true.size())
        throw DataError("micro_auc: " + std::to_string(y_true.size()) + " label rows vs " +
                        std::to_string(scores.rows()) + " score rows");
    truth.clear();
    flat.clear();
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i].size() != static_cast<std::size_t>(scores.cols()))
            throw DataError("micro_auc: label width does not match score width");
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            truth.push_back(y_true[i][static_cast<std::size_t>(c)] ? 1 : 0);
            flat.push_back(scores(static_cast<Eigen::Index>(i), c));
        }
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

ConfusionCounts confusion(std::span<const LabelVector> y_true, std::span<const LabelVector> y_pred) {
    if (y_true.size() != y_pred.size())
        throw DataError("confusion: " + std::to_string(y_true.size()) + " truths vs " +
                        std::to_string(y_pred.size()) + " predictions");
    ConfusionCounts out;
    const std::size_t C = y_true.empty() ? 0 : y_true.front().size();
    out.tp.assign(C, 0);
    out.fp.assign(C, 0);
    out.fn.assign(C, 0);
    out.tn.assign(C, 0);
    out.samples = y_true.size();
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i].size() != C || y_pred[i].size() != C) throw DataError("confusion: label widths differ");
        for (std::size_t c = 0; c < C; ++c) {
            const bool t = y_true[i][c], p = y_pred[i][c];
            if (t && p) ++out.tp[c];
            else if (!t && p) ++out.fp[c];
            else if (t && !p) ++out.fn[c];
            else ++out.tn[c];
        }
    }
    return out;
}

double f1_from(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PrecisionRecallF1 micro_prf(const ConfusionCounts& counts) {
    const auto sum = [](const std::vector<std::size_t>& v) { return std::accumulate(v.begin(), v.end(), std::size_t{0}); };
    return prf_from(sum(counts.tp), sum(counts.fp), sum(counts.fn));
}

PrecisionRecallF1 class_prf(const ConfusionCounts& counts, std::size_t c) {
    return prf_from(counts.tp.at(c), counts.fp.at(c), counts.fn.at(c));
}

std::vector<RocPoint> roc_curve(std::span<const int> truth, std::span<const double> scores) {
    if (truth.size() != scores.size()) throw DataError("roc: truth and score lengths differ");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("roc: non-finite score");
        pos += truth[i] ? 1 : 0;
    }
    const std::size_t neg = truth.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("AUC undefined: pooled truth is all one class");

    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] ? tp : fp) += 1;
            ++i;
        }
        pts.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    return pts;
}

double binary_auc(std::span<const int> truth, std::span<const double> scores) {
    const auto pts = roc_curve(truth, scores);
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
    return area;
}

double micro_auc(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores) {
    std::vector<int> truth;
    std::vector<double> flat;
    pool(y_true, scores, truth, flat);
    return binary_auc(truth, flat);
}

std::vector<RocPoint> micro_roc(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores) {
    std::vector<int> truth;
    std::vector<double> flat;
    pool(y_true, scores, truth, flat);
    return roc_curve(truth, flat);
}

Metrics evaluate_scores(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores,
                        std::span<const std::string> class_names, double threshold) {
    if (static_cast<std::size_t>(scores.rows()) != y_true.size()) throw DataError("evaluate: row count mismatch");
    if (static_cast<std::size_t>(scores.cols()) != class_names.size())
        throw DataError("evaluate: class name count does not match score width");
    std::vector<LabelVector> pred;
    pred.reserve(y_true.size());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        LabelVector l(static_cast<std::size_t>(scores.cols()));
        for (Eigen::Index c = 0; c < scores.cols(); ++c) l.set(static_cast<std::size_t>(c), scores(i, c) >= threshold);
        pred.push_back(std::move(l));
    }
    const auto counts = confusion(y_true, pred);
    Metrics m;
    m.samples = y_true.size();
    m.micro = micro_prf(counts);
    try {
        m.micro_auc = micro_auc(y_true, scores);
    } catch (const DataError&) {
        m.micro_auc.reset();
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        ClassMetrics cm;
        cm.name = class_names[c];
        cm.prf = class_prf(counts, c);
        cm.support = counts.tp[c] + counts.fn[c];
        std::vector<int> truth;
        std::vector<double> col;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            truth.push_back(y_true[i][c] ? 1 : 0);
            col.push_back(scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        }
        try {
            cm.auc = binary_auc(truth, col);
        } catch (const DataError&) {
            cm.auc.reset();
        }
        m.per_class.push_back(std::move(cm));
    }
    return m;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("wilcoxon: paired samples differ in length");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
    const std::size_t n = diffs.size();
    if (n == 0) return 1.0;
    if (n > 20) throw DataError("wilcoxon: exact test supports at most 20 non-zero pairs");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        i = j;
    }
    double w_plus = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += rank[i];
        if (diffs[i] > 0) w_plus += rank[i];
    }
    const double observed = std::abs(w_plus - total / 2.0);
    std::size_t extreme = 0;
    const std::size_t combos = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < combos; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) w += rank[i];
        if (std::abs(w - total / 2.0) >= observed - 1e-12) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(combos);
}

namespace {

template <typename Get>
Summary summarize_folds(const std::vector<Metrics>& folds, Get get) {
    std::vector<double> v;
    for (const auto& f : folds)
        if (auto x = get(f)) v.push_back(*x);
    return summarize(v);
}

nlohmann::ordered_json summary_json(const Summary& s) {
    nlohmann::ordered_json j;
    j["mean"] = s.mean;
    j["sd"] = s.sd;
    j["min"] = s.min;
    j["max"] = s.max;
    return j;
}

}  // namespace

Summary MetricsReport::precision() const {
    return summarize_folds(folds, [](const Metrics& m) { return std::optional<double>(m.micro.precision); });
}
Summary MetricsReport::recall() const {
    return summarize_folds(folds, [](const Metrics& m) { return std::optional<double>(m.micro.recall); });
}
Summary MetricsReport::f1() const {
    return summarize_folds(folds, [](const Metrics& m) { return std::optional<double>(m.micro.f1); });
}
Summary MetricsReport::auc() const {
    return summarize_folds(folds, [](const Metrics& m) { return m.micro_auc; });
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["classes"] = class_names;
    j["fold_count"] = folds.size();
    nlohmann::ordered_json summary;
    summary["micro_precision"] = summary_json(precision());
    summary["micro_recall"] = summary_json(recall());
    summary["micro_f1"] = summary_json(f1());
    summary["micro_auc"] = summary_json(auc());
    j["summary"] = summary;
    j["folds"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& m = folds[i];
        nlohmann::ordered_json f;
        f["fold"] = i;
        f["samples"] = m.samples;
        f["micro_precision"] = m.micro.precision;
        f["micro_recall"] = m.micro.recall;
        f["micro_f1"] = m.micro.f1;
        f["micro_undefined"] = m.micro.undefined;
        f["micro_auc"] = m.micro_auc ? nlohmann::ordered_json(*m.micro_auc) : nlohmann::ordered_json(nullptr);
        f["per_class"] = nlohmann::ordered_json::array();
        for (const auto& c : m.per_class) {
            nlohmann::ordered_json cj;
            cj["name"] = c.name;
            cj["support"] = c.support;
            cj["precision"] = c.prf.precision;
            cj["recall"] = c.prf.recall;
            cj["f1"] = c.prf.f1;
            cj["auc"] = c.auc ? nlohmann::ordered_json(*c.auc) : nlohmann::ordered_json(nullptr);
            f["per_class"].push_back(std::move(cj));
        }
        j["folds"].push_back(std::move(f));
    }
    if (!note.empty()) j["note"] = note;
    return j;
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out << "fold  samples  precision  recall  f1      auc\n";
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& m = folds[i];
        char line[160];
        std::snprintf(line, sizeof line, "%-5zu %-8zu %-10s %-7s %-7s %s\n", i, m.samples,
                      fmt(m.micro.precision).c_str(), fmt(m.micro.recall).c_str(), fmt(m.micro.f1).c_str(),
                      m.micro_auc ? fmt(*m.micro_auc).c_str() : "n/a");
        out << line;
    }
    auto row = [&](const char* name, const Summary& s) {
        out << name << " mean " << fmt(s.mean) << "  sd " << fmt(s.sd) << "\n";
    };
    out << "\n";
    row("micro-precision", precision());
    row("micro-recall   ", recall());
    row("micro-f1       ", f1());
    row("micro-auc      ", auc());
    if (!folds.empty()) {
        out << "\nper-class (fold 0 / single run):\n";
        for (const auto& c : folds.front().per_class) {
            out << "  " << c.name << ": P " << fmt(c.prf.precision) << "  R " << fmt(c.prf.recall) << "  F1 "
                << fmt(c.prf.f1) << "  AUC " << (c.auc ? fmt(*c.auc) : std::string("n/a")) << "  support "
                << c.support << "\n";
        }
    }
    if (!note.empty()) out << "\n" << note << "\n";
    return out.str();
}

}  // namespace ssn
