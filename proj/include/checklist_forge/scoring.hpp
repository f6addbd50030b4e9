/// @file scoring.hpp
/// @brief Per-item hybrid scoring: n-sample judge means fused with verifier
/// program verdicts, and importance-weighted aggregation per response.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/model.hpp"
#include "checklist_forge/sandbox_client.hpp"

namespace checklist_forge {

/// The judge's "totally confused" answer. Parsed, then excluded from means.
inline constexpr double kConfusedSentinel = -1.0;

/// First decimal numeral in the completion. Returns values in [0,100] and the
/// sentinel -1; anything else (no numeral, out of range) is nullopt.
std::optional<double> parse_judge_completion(std::string_view completion);

/// Judge fields of a cell from raw completions. Sentinels and unparseable or
/// out-of-range completions are counted in `excluded_samples`.
ScoreCell judge_cell_from_completions(const std::vector<std::string>& completions);

/// pass -> (mean+100)/2, fail -> (mean+0)/2, anything else -> mean.
/// MISSING judge mean stays MISSING whatever the program said.
ScoreCell fuse(ScoreCell cell, ProgramResult program);
ScoreCell fuse(ScoreCell cell, const std::optional<SandboxVerdict>& verdict);

/// Σ w·c / Σ w over scored items; MISSING when nothing is scored or the
/// scored weights sum to 0. Throws std::invalid_argument on size mismatch.
MaybeScore weighted_mean(std::span<const double> weights, std::span<const MaybeScore> scores);

/// `cells[i]` is the cell for requirement i of `checklist`.
MaybeScore aggregate(const Checklist& checklist, std::span<const ScoreCell> cells);

/// Builds the matrix from per-slot cells (each covering every requirement)
/// and fills both aggregates.
ScoreMatrix assemble_matrix(const Checklist& checklist, std::vector<ScoreCell> cells_a,
                            std::vector<ScoreCell> cells_b);

class Scorer {
public:
    Scorer(Gateway& gateway, const PipelineConfig& config);

    /// One teacher request with `n` completions at the judge temperature.
    /// Gateway failures yield a MISSING mean with the reason in `note`.
    /// Throws std::invalid_argument for n < 1; ReplayMiss propagates.
    ScoreCell judge_item(const Instruction& instruction, const Response& response,
                         const Requirement& requirement, int n);

    TeacherRequest judge_request(const Instruction& instruction, const Response& response,
                                 const Requirement& requirement, int n) const;

private:
    Gateway& gateway_;
    const PipelineConfig& config_;
};

}  // namespace checklist_forge
