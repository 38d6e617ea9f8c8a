#pragma once

// LLM-driven augmentation of minority-class questions: prompt construction,
// response parsing, neighbor-based consistency and diversity scoring and
// threshold selection.

#include "ssn/dataset.hpp"
#include "ssn/encoder.hpp"
#include "ssn/errors.hpp"
#include "ssn/llm_client.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

inline const std::vector<std::string> kDefaultLabelNames = {
    "informational_support_need", "emotional_support_need", "social_support_need"};

struct GenerationBatchSpec {
    std::vector<Sample> few_shot;  // labeled; the best answer is shown when present
    std::size_t requested_count = 20;
    std::vector<std::string> label_names = kDefaultLabelNames;
    std::string domain = "mental health";
    // Class balance requirement placed first in the instruction list.
    std::string balance_directive =
        "The total number of True instances for each label should be as equal as possible across the entire set "
        "of samples.";

    void validate() const;  // ConfigError
};

// Byte-stable for a fixed spec.
std::string build_prompt(const GenerationBatchSpec& spec);

struct Neighbor {
    std::size_t index;  // position in the labeled set
    double similarity;
};

struct AugCandidate {
    std::string id;
    std::string question;
    LabelVector label;  // claimed by the generator
    Eigen::VectorXd embedding;
    std::vector<Neighbor> neighbors;
    double consistency = 0.0;
    double diversity = 0.0;
    double score = 0.0;
    bool kept = false;
    std::map<std::string, std::string> provenance;
};

// A response that yielded no usable item. Keeps the raw text for auditing.
class GenerationError : public DataError {
public:
    GenerationError(const std::string& what, std::string raw) : DataError(what), raw_(std::move(raw)) {}
    const std::string& raw_text() const noexcept { return raw_; }

private:
    std::string raw_;
};

struct ParsedBatch {
    std::vector<AugCandidate> candidates;
    std::size_t malformed = 0;       // not an object, missing question or label fields
    std::size_t all_labels_true = 0; // rejected by the generation constraint
};

// Accepts a JSON array (optionally inside a code fence or under a "samples"
// key) or one JSON object per line. Throws GenerationError when nothing
// parses.
ParsedBatch parse_generated(std::string_view response, std::span<const std::string> label_names);

// Cosine-similarity index over L2-normalized document embeddings of D_l.
class LabeledIndex {
public:
    LabeledIndex(const Dataset& labeled, const Encoder& encoder);
    LabeledIndex(Eigen::MatrixXd embeddings, std::vector<LabelVector> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    const LabelVector& label(std::size_t i) const { return labels_.at(i); }

    // Top-k by cosine similarity, ties broken by lower index. Throws
    // DataError when k is 0 or exceeds the set size.
    std::vector<Neighbor> nearest(const Eigen::VectorXd& query, std::size_t k) const;

private:
    Eigen::MatrixXd embeddings_;  // N x d, unit rows (zero rows stay zero)
    std::vector<LabelVector> labels_;
};

Eigen::VectorXd l2_normalized(Eigen::VectorXd v);

// Fraction of neighbors whose label vector equals `claimed` exactly.
double consistency(const LabelVector& claimed, std::span<const Neighbor> neighbors, const LabeledIndex& index);
// 1 - mean neighbor similarity. Throws DataError on an empty neighbor list.
double diversity(std::span<const Neighbor> neighbors);

struct SelectionConfig {
    std::size_t k = 5;
    double delta = 0.4;  // weight of consistency
    double eta = 0.2;    // keep iff score > eta

    void validate() const;
};

// Embeds each candidate and fills neighbors, consistency, diversity, score
// and kept.
void score_candidates(std::vector<AugCandidate>& candidates, const LabeledIndex& index, const Encoder& encoder,
                      const SelectionConfig& config);
// Recomputes score and kept from stored consistency and diversity.
void apply_selection(std::vector<AugCandidate>& candidates, double delta, double eta);

// Kept candidates as a selected-augmented dataset carrying provenance.
Dataset selected_dataset(std::span<const AugCandidate> candidates, std::size_t num_classes);
// All candidates as an augmented dataset (no score fields).
Dataset candidate_dataset(std::span<const AugCandidate> candidates, std::size_t num_classes);
std::vector<AugCandidate> candidates_from_dataset(const Dataset& augmented);

struct SweepPoint {
    double eta;
    std::size_t kept;
};
std::vector<SweepPoint> eta_sweep(std::span<const AugCandidate> candidates, double delta, std::span<const double> etas);

// Candidate archive: dataset schema plus consistency, diversity, score, kept
// and neighbors (labeled sample ids when `labeled` is given), one record per line.
std::string archive_record(const AugCandidate& candidate, const Dataset* labeled = nullptr);

struct AugmentConfig {
    std::size_t batches = 5;
    std::size_t samples_per_batch = 20;
    std::size_t few_shot = 8;
    std::size_t max_in_flight = 4;
    std::vector<std::string> label_names = kDefaultLabelNames;
    std::string domain = "mental health";
    std::uint64_t seed = 42;

    void validate() const;
};

struct BatchReport {
    std::size_t batch = 0;
    std::string prompt_hash;
    std::string response_id;
    std::size_t parsed = 0;
    std::size_t malformed = 0;
    std::size_t all_labels_true = 0;
    std::string error;  // transport or parse failure
};

struct GenerationResult {
    std::vector<AugCandidate> candidates;
    std::vector<BatchReport> batches;
};

// Index of the class with the fewest positives in `labeled` (lowest index on ties).
std::size_t minority_class(const Dataset& labeled);

// Few-shot examples for batch `b`: minority-class samples first, then others,
// drawn without replacement by a seeded shuffle.
GenerationBatchSpec batch_spec(const Dataset& labeled, const AugmentConfig& config, std::size_t b);

// Throws BackendError when every batch failed.
GenerationResult generate_candidates(LlmClient& client, const Dataset& labeled, const AugmentConfig& config);

}  // namespace ssn
