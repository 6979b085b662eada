#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "marlcc/trainer.hpp"

namespace marlcc::config {

/// One experiment: run settings plus training schedule, seed list and
/// output location. Parsed from a single versioned JSON document; unknown
/// keys are rejected and every omitted field takes its documented default.
struct ExperimentConfig {
    env::RunSettings run;
    env::TrainingConfig training;
    std::vector<std::uint64_t> seeds{1};
    std::string output_dir = "out";
};

inline constexpr int kSchemaVersion = 1;

/// Parses and validates a config document. Throws ConfigError naming the
/// offending key on any violation.
ExperimentConfig parse(const nlohmann::json& doc);

/// Reads, parses and validates a config file.
ExperimentConfig load(const std::filesystem::path& path);

/// Normalized form: every field present, defaults filled, keys sorted.
/// parse(serialize(c)) == c.
nlohmann::json serialize(const ExperimentConfig& config);

/// FNV-1a hash of the normalized serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace marlcc::config
