/// @file checklist_eval.hpp
/// @brief Automatic checklist quality evaluation: four per-metric rubric
/// scores and a position-debiased pairwise preference.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/model.hpp"

namespace checklist_forge {

enum class QualityMetric { naturalness, objectiveness, comprehensiveness, atomicity };

inline constexpr std::array<QualityMetric, 4> kQualityMetrics = {
    QualityMetric::naturalness, QualityMetric::objectiveness, QualityMetric::comprehensiveness,
    QualityMetric::atomicity};

std::string_view to_string(QualityMetric metric);

struct QualityScores {
    std::array<MaybeScore, 4> scores{};  // indexed in kQualityMetrics order
    std::vector<std::string> notes;

    MaybeScore operator[](QualityMetric m) const { return scores[static_cast<std::size_t>(m)]; }
};

enum class Preference { prefer_a, prefer_b, tie };

std::string_view to_string(Preference p);

struct Comparison {
    Preference outcome = Preference::tie;
    Preference original_order = Preference::tie;  // a shown first
    Preference swapped_order = Preference::tie;   // b shown first, mapped back to a/b
    std::string note;
};

/// Checklist as shown to the evaluator: one "N. text (weight: W/100)" line
/// per requirement in original index order.
std::string render_checklist(const Checklist& checklist);

/// Reads the judge's "A" / "B" / "TIE" answer. nullopt when unrecognised.
std::optional<Preference> parse_comparison_completion(std::string_view completion);

class ChecklistEvaluator {
public:
    ChecklistEvaluator(Gateway& gateway, const PipelineConfig& config);

    /// Throws std::invalid_argument if the checklist fails validation.
    /// Gateway failures leave the metric MISSING with a note.
    QualityScores score_checklist_quality(const Instruction& instruction, const Checklist& checklist);

    /// Judges twice with presentation order swapped; disagreement is a tie.
    /// Throws std::invalid_argument if the checklists target different
    /// instructions.
    Comparison compare_checklists(const Instruction& instruction, const Checklist& a, const Checklist& b);

    TeacherRequest quality_request(QualityMetric metric, const Instruction& instruction,
                                   const Checklist& checklist) const;
    TeacherRequest compare_request(const Instruction& instruction, const Checklist& first,
                                   const Checklist& second) const;

private:
    std::optional<Preference> ask(const TeacherRequest& request, std::string& note);

    Gateway& gateway_;
    const PipelineConfig& config_;
};

struct ChecklistEvalRow {
    std::string instruction_id;
    QualityScores direct;
    QualityScores candidate_based;
    Comparison comparison;  // a = direct, b = candidate_based
};

/// Per-row details plus per-method metric means and the share of
/// instructions on which each method was preferred, all on a 0-100 scale.
nlohmann::json checklist_eval_report(const std::vector<ChecklistEvalRow>& rows);

/// Plain-text table of the report's means.
std::string format_eval_table(const nlohmann::json& report);

}  // namespace checklist_forge
