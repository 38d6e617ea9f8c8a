#pragma once

// Seeded synthetic corpus of support-seeking questions with answers. Each
// class has its own phrase pools, so the label is recoverable from question
// text; one class is deliberately rare and no question carries all three.

#include "ssn/dataset.hpp"

#include <cstddef>
#include <cstdint>

namespace ssn {

struct SyntheticConfig {
    std::size_t labeled = 200;
    std::size_t unlabeled = 800;
    std::size_t test = 400;
    // Marginal rates for (informational, emotional, network).
    double informational_rate = 0.55;
    double emotional_rate = 0.5;
    double network_rate = 0.10;
    // Chance that a question also carries one off-label cue word.
    double cue_noise = 0.1;
    std::size_t max_answers = 5;
    std::uint64_t seed = 7;
};

struct SyntheticCorpus {
    Dataset labeled;
    Dataset unlabeled;
    Dataset test;  // labeled, disjoint from the other two
};

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config);

}  // namespace ssn
