/// @file model.hpp
/// @brief Shared data model for the checklist-feedback pipeline.
///
/// Every record type here is a plain value. Once built by a stage it is never
/// mutated, so workers can share them freely.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace checklist_forge {

/// A per-item or aggregate score in [0,100]. `std::nullopt` is MISSING:
/// "not scored", which is distinct from a score of 0.
using MaybeScore = std::optional<double>;

inline constexpr std::nullopt_t kMissing = std::nullopt;

enum class RequirementKind { generated, universal };
enum class ChecklistMethod { direct, candidate_based };
enum class Slot { A, B };
enum class ProgramResult { pass, fail, error, absent };
enum class FilterStrategy { max_single_aspect, overall_score };

/// Regularizing requirement appended to every checklist at weight 100.
inline constexpr std::string_view kUniversalRequirementText =
    "Does the response satisfy the following two criteria: 1) The response "
    "directly address the request without excessive or off-topic information "
    "not necessary for addressing the user's instruction? 2) The response "
    "should match the context and the instruction, whether it requires "
    "professionalism, friendliness, formality, or neutrality.";

inline constexpr double kUniversalWeight = 100.0;

struct Instruction {
    std::string id;
    std::string text;
    std::string source;
    int turn_count = 1;

    bool operator==(const Instruction&) const = default;
};

struct Requirement {
    int index = 0;
    std::string text;
    double weight = 0.0;
    RequirementKind kind = RequirementKind::generated;
    std::optional<std::string> verifier_source;

    bool operator==(const Requirement&) const = default;
};

struct Checklist {
    std::string instruction_id;
    std::vector<Requirement> requirements;
    ChecklistMethod method = ChecklistMethod::direct;

    bool operator==(const Checklist&) const = default;
};

struct SamplerParams {
    double temperature = 1.0;
    double top_p = 1.0;

    bool operator==(const SamplerParams&) const = default;
};

struct Response {
    std::string instruction_id;
    Slot slot = Slot::A;
    std::string text;
    SamplerParams sampler;

    bool operator==(const Response&) const = default;
};

struct ScoreCell {
    std::vector<double> judge_samples;  // kept samples only, each in [0,100]
    int excluded_samples = 0;           // sentinel or unparseable completions
    MaybeScore judge_mean;
    ProgramResult program_result = ProgramResult::absent;
    MaybeScore combined;
    std::string note;  // reason for MISSING or program error detail

    bool operator==(const ScoreCell&) const = default;
};

using CellKey = std::pair<Slot, int>;

struct ScoreMatrix {
    std::string instruction_id;
    std::map<CellKey, ScoreCell> cells;
    std::map<Slot, MaybeScore> aggregate;

    bool operator==(const ScoreMatrix&) const = default;
};

struct PreferencePair {
    std::string instruction_id;
    Slot chosen_slot = Slot::A;
    Slot rejected_slot = Slot::B;
    double chosen_score = 0.0;
    double rejected_score = 0.0;
    double max_criterion_diff = 0.0;
    double overall_diff = 0.0;
    bool retained = false;

    bool operator==(const PreferencePair&) const = default;
};

/// Result of structural validation. Errors break an invariant; warnings flag
/// soft issues such as a requirement not phrased as a question.
struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
};

ValidationReport validate_checklist(const Checklist& checklist);

/// Appends the universal requirement. Throws std::logic_error if the
/// checklist already has one and std::invalid_argument if it is empty.
Checklist inject_universal(Checklist checklist);

std::string_view to_string(RequirementKind kind);
std::string_view to_string(ChecklistMethod method);
std::string_view to_string(Slot slot);
std::string_view to_string(ProgramResult result);
std::string_view to_string(FilterStrategy strategy);

// Parsers throw std::invalid_argument on unknown names.
RequirementKind requirement_kind_from_string(std::string_view s);
ChecklistMethod checklist_method_from_string(std::string_view s);
Slot slot_from_string(std::string_view s);
ProgramResult program_result_from_string(std::string_view s);
FilterStrategy filter_strategy_from_string(std::string_view s);

inline Slot other_slot(Slot s) { return s == Slot::A ? Slot::B : Slot::A; }

}  // namespace checklist_forge
