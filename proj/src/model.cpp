#include "checklist_forge/model.hpp"

#include <cmath>
#include <stdexcept>

#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

namespace {

std::string req_msg(int i, std::string_view what) {
    return "req " + std::to_string(i) + ": " + std::string(what);
}

}  // namespace

ValidationReport validate_checklist(const Checklist& checklist) {
    ValidationReport report;
    if (checklist.instruction_id.empty()) report.errors.push_back("instruction_id empty");
    if (checklist.requirements.empty()) {
        report.errors.push_back("checklist empty");
        return report;
    }

    int universal_count = 0;
    for (std::size_t pos = 0; pos < checklist.requirements.size(); ++pos) {
        const auto& r = checklist.requirements[pos];
        const int i = static_cast<int>(pos);
        if (r.index != i) {
            report.errors.push_back(req_msg(i, "index must be " + std::to_string(i) +
                                                   " (found " + std::to_string(r.index) + ")"));
        }
        const std::string text = trim(r.text);
        if (text.empty()) report.errors.push_back(req_msg(i, "text empty"));
        if (!std::isfinite(r.weight) || r.weight < 0.0 || r.weight > 100.0) {
            report.errors.push_back(req_msg(i, "weight out of range [0,100]"));
        }
        if (r.kind == RequirementKind::universal) {
            ++universal_count;
            if (r.weight != kUniversalWeight) {
                report.errors.push_back(req_msg(i, "universal weight must be 100"));
            }
            if (r.text != kUniversalRequirementText) {
                report.errors.push_back(req_msg(i, "universal text must be canonical"));
            }
            if (r.verifier_source) {
                report.errors.push_back(req_msg(i, "universal requirement cannot carry a verifier"));
            }
        } else if (!text.empty() && text.back() != '?') {
            report.warnings.push_back(req_msg(i, "not phrased as a question"));
        }
    }
    if (universal_count != 1) {
        report.errors.push_back("checklist must contain exactly one universal requirement (found " +
                                std::to_string(universal_count) + ")");
    }
    return report;
}

Checklist inject_universal(Checklist checklist) {
    if (checklist.requirements.empty()) {
        throw std::invalid_argument("cannot inject universal requirement into an empty checklist");
    }
    for (const auto& r : checklist.requirements) {
        if (r.kind == RequirementKind::universal) {
            throw std::logic_error("checklist for '" + checklist.instruction_id +
                                   "' already has a universal requirement");
        }
    }
    Requirement universal;
    universal.index = static_cast<int>(checklist.requirements.size());
    universal.text = std::string(kUniversalRequirementText);
    universal.weight = kUniversalWeight;
    universal.kind = RequirementKind::universal;
    checklist.requirements.push_back(std::move(universal));
    return checklist;
}

std::string_view to_string(RequirementKind kind) {
    return kind == RequirementKind::universal ? "universal" : "generated";
}

std::string_view to_string(ChecklistMethod method) {
    return method == ChecklistMethod::direct ? "direct" : "candidate_based";
}

std::string_view to_string(Slot slot) { return slot == Slot::A ? "A" : "B"; }

std::string_view to_string(ProgramResult result) {
    switch (result) {
        case ProgramResult::pass: return "pass";
        case ProgramResult::fail: return "fail";
        case ProgramResult::error: return "error";
        case ProgramResult::absent: return "absent";
    }
    return "absent";
}

std::string_view to_string(FilterStrategy strategy) {
    return strategy == FilterStrategy::max_single_aspect ? "max_single_aspect" : "overall_score";
}

RequirementKind requirement_kind_from_string(std::string_view s) {
    if (s == "generated") return RequirementKind::generated;
    if (s == "universal") return RequirementKind::universal;
    throw std::invalid_argument("unknown requirement kind '" + std::string(s) + "'");
}

ChecklistMethod checklist_method_from_string(std::string_view s) {
    if (s == "direct") return ChecklistMethod::direct;
    if (s == "candidate_based") return ChecklistMethod::candidate_based;
    throw std::invalid_argument("unknown checklist method '" + std::string(s) + "'");
}

Slot slot_from_string(std::string_view s) {
    if (s == "A") return Slot::A;
    if (s == "B") return Slot::B;
    throw std::invalid_argument("unknown slot '" + std::string(s) + "'");
}

ProgramResult program_result_from_string(std::string_view s) {
    if (s == "pass") return ProgramResult::pass;
    if (s == "fail") return ProgramResult::fail;
    if (s == "error") return ProgramResult::error;
    if (s == "absent") return ProgramResult::absent;
    throw std::invalid_argument("unknown program result '" + std::string(s) + "'");
}

FilterStrategy filter_strategy_from_string(std::string_view s) {
    if (s == "max_single_aspect") return FilterStrategy::max_single_aspect;
    if (s == "overall_score") return FilterStrategy::overall_score;
    throw std::invalid_argument("unknown filter strategy '" + std::string(s) + "'");
}

}  // namespace checklist_forge
