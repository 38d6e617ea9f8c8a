#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

inline constexpr std::size_t kDefaultNumClasses = 3;

// Multi-hot label over the class set. Default class order is
// (informational, emotional, network).
class LabelVector {
public:
    LabelVector() = default;
    explicit LabelVector(std::size_t num_classes) : values_(num_classes, 0) {}
    LabelVector(std::initializer_list<int> values);
    explicit LabelVector(std::span<const int> values);

    std::size_t size() const noexcept { return values_.size(); }
    bool operator[](std::size_t c) const { return values_.at(c) != 0; }
    void set(std::size_t c, bool on) { values_.at(c) = on ? 1 : 0; }
    std::size_t count() const noexcept;
    std::vector<int> to_ints() const;

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::vector<std::uint8_t> values_;
};

struct AnswerRecord {
    std::string text;
    bool is_best = false;

    friend bool operator==(const AnswerRecord&, const AnswerRecord&) = default;
};

struct Sample {
    std::string id;
    std::string question;
    std::vector<AnswerRecord> answers;
    std::optional<LabelVector> label;
    // Per-class confidence mask, set for pseudo-labeled samples only.
    std::optional<std::vector<std::uint8_t>> label_mask;
    // Provenance tag ("labeled", "pseudo", "augmented", ...); empty when unset.
    std::string origin;
    // Free-form audit fields (prompt hash, response id, ...); empty for real data.
    std::map<std::string, std::string> provenance;

    std::optional<std::size_t> best_answer() const;
    bool has_best_answer() const { return best_answer().has_value(); }
    // True when every class is trusted: real labels, or a pseudo label whose
    // mask is all ones.
    bool all_confident() const;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class DatasetKind {
    Labeled,            // D_l
    Unlabeled,          // D_u
    Pseudo,             // D_u*
    Augmented,          // D_a
    SelectedAugmented,  // D_a*
    Fused,              // D_f
};

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

// Immutable collection of samples whose members all satisfy the invariants of
// `kind`. Construction throws DataError on the first violation.
class Dataset {
public:
    Dataset(DatasetKind kind, std::vector<Sample> samples,
            std::size_t num_classes = kDefaultNumClasses);

    DatasetKind kind() const noexcept { return kind_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::span<const Sample> samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_.at(i); }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

    Dataset subset(std::span<const std::size_t> indices) const;

private:
    DatasetKind kind_;
    std::size_t num_classes_;
    std::vector<Sample> samples_;
};

struct ParseOptions {
    std::size_t num_classes = kDefaultNumClasses;
    // K: answers kept per question (best answer plus the first K-1 others).
    std::size_t max_answers = 5;
    // Strict parsing throws RecordError on the first malformed line; lenient
    // parsing skips it and records a diagnostic.
    bool strict = true;
};

struct ParseResult {
    Dataset dataset;
    std::size_t dropped_no_best = 0;     // answers present, none flagged best
    std::size_t dropped_no_answers = 0;  // unlabeled sample without answers
    std::size_t labels_stripped = 0;     // labels present on unlabeled input
    std::size_t answers_truncated = 0;   // samples that exceeded max_answers
    std::vector<std::string> diagnostics;
};

ParseResult parse_dataset(std::istream& in, DatasetKind kind, const ParseOptions& options = {});
ParseResult load_dataset(const std::string& path, DatasetKind kind, const ParseOptions& options = {});

// One JSON object per line, fixed key order; the inverse of the record parser.
std::string serialize_sample(const Sample& sample);
// Header line followed by one record per line.
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::string& path, const Dataset& dataset);

struct Fold {
    Dataset train;
    Dataset test;
};

// Shuffled k-fold partition; test fold sizes differ by at most one.
std::vector<Fold> split_kfold(const Dataset& dataset, std::size_t folds, std::uint64_t seed);

struct FuseResult {
    Dataset fused;
    // Pseudo samples that were only partially confident and therefore left out.
    std::size_t excluded_partial = 0;
};

// D_f = questions of D_l + fully confident D_u* + D_a*, answers stripped.
FuseResult fuse(const Dataset& labeled, const Dataset& pseudo, const Dataset& selected);

}  // namespace ssn
