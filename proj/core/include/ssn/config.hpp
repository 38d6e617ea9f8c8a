#pragma once

// Layered run configuration: built-in defaults, then a JSON file, then
// SSN_<SECTION>_<KEY> environment variables, then --set overrides. The merged
// tree is validated as a whole before any stage runs.

#include "ssn/augmentation.hpp"
#include "ssn/encoder.hpp"
#include "ssn/llm_client.hpp"
#include "ssn/q_model.hpp"
#include "ssn/qa_model.hpp"
#include "ssn/ssl_trainer.hpp"
#include "ssn/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssn {

struct DataPaths {
    std::string labeled;
    std::string unlabeled;
    std::string test;
};

struct AugmentSettings {
    bool enabled = true;
    std::string backend = "stub";  // "stub" | "openai"
    HttpChatConfig http;
    double stub_noise = 0.15;
    AugmentConfig generation;
    SelectionConfig selection;
};

struct EvalConfig {
    std::size_t folds = 10;
    bool full_pipeline = true;  // false: supervised Q-model only
    bool roc_points = false;    // export micro ROC points with reports
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::vector<std::string> classes = {"informational", "emotional", "network"};
    std::size_t max_answers = 5;
    DataPaths data;
    EncoderConfig encoder;
    QAModelConfig model;  // dim, m, n, K and class count follow the other sections
    TrainConfig trainer;
    AugmentSettings augment;
    QModelConfig qmodel;
    QTrainConfig qtrain;
    EvalConfig eval;
    SyntheticConfig synth;
    std::string output_dir = "runs/latest";

    std::size_t num_classes() const noexcept { return classes.size(); }

    // Throws ConfigError listing every offending field, one per line.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    // Type-checks every field; throws ConfigError naming the bad fields.
    static RunConfig from_json(const nlohmann::ordered_json& tree);

    // Hash of the full effective config.
    std::string hash() const;
    // Hash over the named top-level sections only, e.g. {"data", "encoder", "model"}.
    std::string section_hash(std::initializer_list<std::string_view> sections) const;
};

nlohmann::ordered_json default_config_json();

// Merges `layer` into `tree`; keys absent from the defaults are rejected.
void merge_config(nlohmann::ordered_json& tree, const nlohmann::json& layer);
// Applies one "section.key=value" assignment.
void apply_override(nlohmann::ordered_json& tree, std::string_view assignment);
// Applies SSN_<SECTION>_<KEY> variables for every known leaf.
void apply_environment(nlohmann::ordered_json& tree);

struct ConfigSources {
    std::optional<std::string> file;
    bool use_environment = true;
    std::vector<std::string> overrides;
};

RunConfig load_config(const ConfigSources& sources);

}  // namespace ssn
