/// @file pipeline.hpp
/// @brief Stage orchestration: stage files, manifest-based resumability,
/// atomic writes and batch diagnostics.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/model.hpp"
#include "checklist_forge/sandbox_client.hpp"

namespace checklist_forge {

enum class Stage { ingest, checklists, verifiers, responses, score, mine, eval_checklists, all };

std::string_view to_string(Stage stage);
/// Accepts the CLI spelling ("eval-checklists"). Throws std::invalid_argument.
Stage stage_from_string(std::string_view s);

/// Stages run by `all`, in order.
const std::vector<Stage>& pipeline_order();

namespace stage_files {
inline constexpr const char* instructions = "instructions.jsonl";
inline constexpr const char* candidates = "candidates.jsonl";
inline constexpr const char* checklists = "checklists.jsonl";
inline constexpr const char* responses = "responses.jsonl";
inline constexpr const char* scores = "scores.jsonl";
inline constexpr const char* pairs = "pairs.jsonl";
inline constexpr const char* preferences = "preferences.jsonl";
inline constexpr const char* mine_summary = "mine_summary.json";
inline constexpr const char* eval_checklists = "eval_checklists.jsonl";
inline constexpr const char* eval_report = "eval_report.json";
inline constexpr const char* eval_table = "eval_report.txt";
inline constexpr const char* manifest = "manifest.json";
}  // namespace stage_files

class UpstreamMissing : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Ingestion

struct RawRecord {
    std::string id;
    std::string text;
    std::string source;
    int turn_count = 1;
    std::optional<std::string> language;
    bool toxic = false;
};

/// Returns false to exclude a record; sets `reason` to the filter name.
using IngestFilter = std::function<bool(const RawRecord&, std::string& reason)>;

/// Metadata-flag filters for language, turn count and toxicity.
std::vector<IngestFilter> default_ingest_filters(const IngestFilters& config);

struct IngestResult {
    std::vector<Instruction> instructions;  // sorted by id
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> warnings;
};

/// Parses the corpus (one JSON record per line, either {"text": ...} or
/// {"conversation": [{"role","content"}, ...]}). Malformed lines are skipped
/// and counted; duplicate ids keep the first occurrence.
IngestResult ingest(std::istream& corpus, const std::vector<IngestFilter>& filters);

// ---------------------------------------------------------------------------
// Stage runner

struct StageReport {
    Stage stage = Stage::ingest;
    bool skipped = false;  // already complete under the same config hash
    std::map<std::string, std::size_t> counts;
    std::size_t warnings = 0;
    std::size_t failures = 0;
};

class Pipeline {
public:
    Pipeline(LoadedConfig config, std::shared_ptr<Gateway> gateway,
             std::shared_ptr<VerifierExecutor> executor, std::ostream* log = nullptr);

    /// Runs one stage, or every stage in order for Stage::all. A stage that
    /// already completed under the current config hash is a no-op unless
    /// `force` is set. Throws UpstreamMissing when inputs are absent;
    /// ReplayMiss propagates.
    std::vector<StageReport> run(Stage stage, bool force = false);

    std::filesystem::path out_dir() const;
    const std::string& hash() const { return config_hash_; }

private:
    StageReport run_one(Stage stage, bool force);

    LoadedConfig loaded_;
    std::shared_ptr<Gateway> gateway_;
    std::shared_ptr<VerifierExecutor> executor_;
    std::ostream* log_;
    std::string config_hash_;
};

/// Writes `content` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace checklist_forge
