#pragma once

// Checkpoint directory: manifest.json (kind, config hash, tensor table,
// checksum, free-form metadata) plus params.bin holding every tensor as raw
// little-endian doubles in manifest order.

#include "ssn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace ssn {

inline constexpr int kCheckpointFormat = 1;

struct CheckpointInfo {
    std::string kind;         // "qa-model" | "q-model"
    std::string config_hash;  // hash of the config sections that shape the model
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

void save_checkpoint(const std::string& dir, const CheckpointInfo& info, const std::vector<ConstTensorView>& tensors);

// Fills `tensors` in place. Throws ConfigError when the kind or config hash
// differs from `expected`, DataError on a tensor table mismatch or a corrupt
// payload, IoError when files are missing.
nlohmann::ordered_json load_checkpoint(const std::string& dir, const CheckpointInfo& expected,
                                       const std::vector<TensorView>& tensors);

// Manifest only, without touching the payload.
nlohmann::ordered_json read_manifest(const std::string& dir);

}  // namespace ssn
