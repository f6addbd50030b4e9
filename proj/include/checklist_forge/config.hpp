/// @file config.hpp
/// @brief Pipeline configuration: one declarative JSON file covering every
/// tunable, with field-level validation and a stable hash for resumability.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "checklist_forge/model.hpp"

namespace checklist_forge {

struct IngestFilters {
    std::optional<std::string> language = "English";  // nullopt disables the filter
    int max_turns = 2;
    bool drop_toxic = true;

    bool operator==(const IngestFilters&) const = default;
};

struct PipelineConfig {
    // Judge scoring.
    int judge_sample_count = 25;
    double judge_temperature = 1.3;
    int judge_max_tokens = 16;

    // Policy response sampling (two responses per instruction).
    std::string policy_model = "Qwen2.5-7B-Instruct";
    double response_temperature = 1.3;
    double response_top_p = 0.9;
    int response_max_tokens = 2048;

    // Pair mining.
    double retention_fraction = 0.40;
    FilterStrategy filter_strategy = FilterStrategy::max_single_aspect;

    // Checklist generation.
    std::string teacher_model = "Qwen2.5-72B-Instruct";
    ChecklistMethod checklist_method = ChecklistMethod::candidate_based;
    std::vector<std::string> candidate_model_set = {"Qwen2.5-0.5B", "Qwen2.5-1.5B", "Qwen2.5-3B",
                                                    "Qwen2.5-7B"};
    double checklist_temperature = 0.7;
    int checklist_max_tokens = 1024;
    int max_checklist_items = 12;
    int candidate_truncate_chars = 2048;
    double candidate_temperature = 1.0;
    double candidate_top_p = 1.0;
    int candidate_max_tokens = 1024;

    // Verifier programs.
    double verifier_temperature = 0.0;
    int verifier_max_tokens = 1024;
    int sandbox_timeout_ms = 2000;
    int sandbox_memory_limit_mb = 256;
    std::vector<std::string> sandbox_command;  // empty: no sandbox, programs never run

    // Execution.
    int concurrency = 8;
    std::uint64_t seed = 0;
    bool endpoint_supports_n = true;

    // Paths, relative to the config file's directory.
    std::string corpus_path = "corpus.jsonl";
    std::string output_dir = "out";
    IngestFilters ingest;

    bool operator==(const PipelineConfig&) const = default;
};

/// Carries one message per offending field, e.g. "retention_fraction: must be in (0,1]".
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> field_errors);
    const std::vector<std::string>& field_errors() const { return field_errors_; }

private:
    std::vector<std::string> field_errors_;
};

std::vector<std::string> validate_config(const PipelineConfig& config);

nlohmann::json config_to_json(const PipelineConfig& config);
/// Missing keys keep their defaults; unknown keys and type errors are field
/// errors. Throws ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);

struct LoadedConfig {
    PipelineConfig config;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& p) const;
};

/// Throws ConfigError on unreadable, unparseable or invalid configs.
LoadedConfig load_config(const std::filesystem::path& path);

/// SHA-256 over the canonical config and every prompt template hash.
std::string config_hash(const PipelineConfig& config);

}  // namespace checklist_forge
