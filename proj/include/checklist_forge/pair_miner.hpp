/// @file pair_miner.hpp
/// @brief Chosen/rejected pair formation, top-fraction retention filtering
/// and preference-dataset export.

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "checklist_forge/model.hpp"

namespace checklist_forge {

enum class PairDropReason { none, missing_aggregate, tie, no_common_criterion };

std::string_view to_string(PairDropReason reason);

struct PairOutcome {
    std::optional<PreferencePair> pair;
    PairDropReason reason = PairDropReason::none;
};

/// Higher aggregate is chosen. No pair when either aggregate is MISSING, the
/// aggregates tie exactly, or no requirement is scored on both slots (the
/// per-criterion difference would be undefined).
PairOutcome form_pair(const ScoreMatrix& matrix);

double sort_key(const PreferencePair& pair, FilterStrategy strategy);

/// ⌈fraction·n⌉, computed so that exact products such as 0.1·30 are not
/// pushed up by binary rounding. Requires 0 < fraction <= 1.
std::size_t retention_count(std::size_t n, double fraction);

/// Sorts by the strategy's key, descending, with ties broken by ascending
/// instruction id, and marks the top retention_count() pairs retained.
/// Returns every pair, in that rank order. Throws std::invalid_argument for
/// a fraction outside (0,1].
std::vector<PreferencePair> filter_pairs(std::vector<PreferencePair> pairs, FilterStrategy strategy,
                                         double retention_fraction);

class ExportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Content-derived checklist identifier (first 16 hex of the SHA-256 of its
/// canonical line).
std::string checklist_id(const Checklist& checklist);

struct ExportInputs {
    std::map<std::string, Instruction> instructions;
    std::map<std::string, std::map<Slot, Response>> responses;
    std::map<std::string, Checklist> checklists;
};

/// One canonical line per retained pair, ordered by instruction id. Pairs
/// not marked retained are skipped. Throws ExportError naming the first
/// instruction whose instruction, response or checklist is missing.
std::string export_preferences(const std::vector<PreferencePair>& pairs, const ExportInputs& inputs);

struct MiningDiagnostics {
    std::size_t matrices = 0;
    std::map<PairDropReason, std::size_t> dropped;
};

/// Retention statistics, diff histograms and a retention-fraction sweep for
/// both strategies, over every formed pair.
nlohmann::json mining_summary(const std::vector<PreferencePair>& ranked, FilterStrategy strategy,
                              double retention_fraction, const MiningDiagnostics& diagnostics);

}  // namespace checklist_forge
