/// @file checklist_gen.hpp
/// @brief Checklist extraction: direct prompting, and candidate-based
/// prompting from a ladder of responses of varying quality.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/model.hpp"
#include "checklist_forge/outcome.hpp"

namespace checklist_forge {

inline constexpr double kDefaultItemWeight = 75.0;

struct ParsedItem {
    std::string text;
    double weight = kDefaultItemWeight;
};

struct ParsedChecklist {
    std::vector<ParsedItem> items;
    std::vector<std::string> warnings;
};

/// Parses a numbered list of "<question> (weight: N/100)" lines. Tolerates
/// bullets, bold markers, "Weight=N", brackets and missing parentheses.
/// A missing weight becomes 75 and out-of-range weights are clamped, each
/// with a warning. Items past `max_items` are dropped from the tail.
ParsedChecklist parse_checklist_completion(std::string_view completion, int max_items);

struct Candidate {
    std::string model;
    std::string text;
};

/// Candidate responses ordered weakest to strongest model.
struct CandidateSet {
    std::string instruction_id;
    std::vector<Candidate> candidates;
};

class ChecklistGenerator {
public:
    ChecklistGenerator(Gateway& gateway, const PipelineConfig& config);

    // All three throw std::invalid_argument on an instruction with blank text,
    // before any teacher call. ReplayMiss propagates.
    Outcome<Checklist> generate_direct(const Instruction& instruction);
    Outcome<CandidateSet> generate_candidates(const Instruction& instruction);
    Outcome<Checklist> generate_candidate_based(const Instruction& instruction,
                                                const CandidateSet& candidates);

    /// Dispatches on `method`, sampling candidates first when needed.
    Outcome<Checklist> generate(const Instruction& instruction, ChecklistMethod method);

    TeacherRequest direct_request(const Instruction& instruction) const;
    TeacherRequest candidate_based_request(const Instruction& instruction,
                                           const CandidateSet& candidates) const;
    TeacherRequest candidate_request(const Instruction& instruction, const std::string& model) const;

private:
    Outcome<Checklist> run_checklist_request(const Instruction& instruction,
                                             const TeacherRequest& request, ChecklistMethod method);

    Gateway& gateway_;
    const PipelineConfig& config_;
};

}  // namespace checklist_forge
