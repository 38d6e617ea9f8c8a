#pragma once

#include "ssn/dataset.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssn {

struct ConfusionCounts {
    std::vector<std::size_t> tp, fp, fn, tn;
    std::size_t samples = 0;

    std::size_t num_classes() const noexcept { return tp.size(); }
};

ConfusionCounts confusion(std::span<const LabelVector> y_true, std::span<const LabelVector> y_pred);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Set when a denominator was zero and the metric was reported as 0.
    bool undefined = false;
};

// Pools counts over classes before taking ratios.
PrecisionRecallF1 micro_prf(const ConfusionCounts& counts);
PrecisionRecallF1 class_prf(const ConfusionCounts& counts, std::size_t c);
// Harmonic mean; 0 when both inputs are 0.
double f1_from(double precision, double recall);

struct RocPoint {
    double fpr;
    double tpr;
    double threshold;
};

// Area under the ROC of one binary scored set, by trapezoidal integration
// with tied scores forming one step (equals the pairwise rank statistic with
// ties counted 1/2). Throws DataError when either class is absent.
double binary_auc(std::span<const int> truth, std::span<const double> scores);
std::vector<RocPoint> roc_curve(std::span<const int> truth, std::span<const double> scores);

// Every (sample, class) pair pooled into one binary problem. `scores` is
// N x |C|.
double micro_auc(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores);
std::vector<RocPoint> micro_roc(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores);

struct ClassMetrics {
    std::string name;
    PrecisionRecallF1 prf;
    std::optional<double> auc;
    std::size_t support = 0;
};

struct Metrics {
    PrecisionRecallF1 micro;
    std::optional<double> micro_auc;
    std::vector<ClassMetrics> per_class;
    std::size_t samples = 0;
};

// Hard labels are [p >= threshold] per class.
Metrics evaluate_scores(std::span<const LabelVector> y_true, const Eigen::MatrixXd& scores,
                        std::span<const std::string> class_names, double threshold = 0.5);

struct Summary {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation (n - 1)
    double min = 0.0;
    double max = 0.0;
};
Summary summarize(std::span<const double> values);

// Exact two-sided Wilcoxon signed-rank p-value for paired samples (zero
// differences dropped, tied magnitudes get average ranks). Returns 1 when no
// non-zero differences remain.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
    std::vector<std::string> class_names;
    std::vector<Metrics> folds;  // a single entry for a plain evaluation
    std::string note;

    Summary precision() const;
    Summary recall() const;
    Summary f1() const;
    Summary auc() const;  // over folds where AUC was defined

    nlohmann::ordered_json to_json() const;
    std::string to_table() const;
};

}  // namespace ssn
