#include "checklist_forge/pair_miner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

std::string_view to_string(PairDropReason reason) {
    switch (reason) {
        case PairDropReason::none: return "none";
        case PairDropReason::missing_aggregate: return "missing_aggregate";
        case PairDropReason::tie: return "tie";
        case PairDropReason::no_common_criterion: return "no_common_criterion";
    }
    return "none";
}

PairOutcome form_pair(const ScoreMatrix& matrix) {
    auto get = [&](Slot s) -> MaybeScore {
        auto it = matrix.aggregate.find(s);
        return it == matrix.aggregate.end() ? kMissing : it->second;
    };
    const MaybeScore a = get(Slot::A);
    const MaybeScore b = get(Slot::B);
    if (!a || !b) return {std::nullopt, PairDropReason::missing_aggregate};
    if (*a == *b) return {std::nullopt, PairDropReason::tie};

    std::optional<double> max_diff;
    for (const auto& [key, cell_a] : matrix.cells) {
        if (key.first != Slot::A) continue;
        auto it = matrix.cells.find({Slot::B, key.second});
        if (it == matrix.cells.end() || !cell_a.combined || !it->second.combined) continue;
        const double d = std::abs(*cell_a.combined - *it->second.combined);
        max_diff = max_diff ? std::max(*max_diff, d) : d;
    }
    if (!max_diff) return {std::nullopt, PairDropReason::no_common_criterion};

    PreferencePair p;
    p.instruction_id = matrix.instruction_id;
    p.chosen_slot = *a > *b ? Slot::A : Slot::B;
    p.rejected_slot = other_slot(p.chosen_slot);
    p.chosen_score = std::max(*a, *b);
    p.rejected_score = std::min(*a, *b);
    p.max_criterion_diff = *max_diff;
    p.overall_diff = std::abs(*a - *b);
    return {p, PairDropReason::none};
}

double sort_key(const PreferencePair& pair, FilterStrategy strategy) {
    return strategy == FilterStrategy::max_single_aspect ? pair.max_criterion_diff : pair.overall_diff;
}

std::size_t retention_count(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("retention fraction must be in (0,1]");
    }
    if (n == 0) return 0;
    const double x = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
    return std::clamp<std::size_t>(k, 1, n);
}

std::vector<PreferencePair> filter_pairs(std::vector<PreferencePair> pairs, FilterStrategy strategy,
                                         double retention_fraction) {
    const std::size_t keep = retention_count(pairs.size(), retention_fraction);
    std::stable_sort(pairs.begin(), pairs.end(), [&](const PreferencePair& x, const PreferencePair& y) {
        const double kx = sort_key(x, strategy);
        const double ky = sort_key(y, strategy);
        if (kx != ky) return kx > ky;
        return x.instruction_id < y.instruction_id;
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].retained = i < keep;
    return pairs;
}

std::string checklist_id(const Checklist& checklist) {
    return sha256_hex(canonical_serialize(checklist)).substr(0, 16);
}

std::string export_preferences(const std::vector<PreferencePair>& pairs, const ExportInputs& inputs) {
    std::vector<const PreferencePair*> retained;
    for (const auto& p : pairs) {
        if (p.retained) retained.push_back(&p);
    }
    std::sort(retained.begin(), retained.end(),
              [](const auto* x, const auto* y) { return x->instruction_id < y->instruction_id; });

    std::string out;
    for (const auto* p : retained) {
        const auto& id = p->instruction_id;
        auto inst = inputs.instructions.find(id);
        if (inst == inputs.instructions.end()) throw ExportError("dangling instruction reference: " + id);
        auto resp = inputs.responses.find(id);
        if (resp == inputs.responses.end()) throw ExportError("no responses for instruction: " + id);
        auto chosen = resp->second.find(p->chosen_slot);
        auto rejected = resp->second.find(p->rejected_slot);
        if (chosen == resp->second.end() || rejected == resp->second.end()) {
            const Slot missing = chosen == resp->second.end() ? p->chosen_slot : p->rejected_slot;
            throw ExportError("instruction " + id + " has no response in slot " +
                              std::string(to_string(missing)));
        }
        auto cl = inputs.checklists.find(id);
        if (cl == inputs.checklists.end()) throw ExportError("no checklist for instruction: " + id);

        json rec{{"instruction_id", id},
                 {"instruction", inst->second.text},
                 {"chosen", chosen->second.text},
                 {"rejected", rejected->second.text},
                 {"chosen_score", json_number(p->chosen_score, "chosen_score")},
                 {"rejected_score", json_number(p->rejected_score, "rejected_score")},
                 {"max_criterion_diff", json_number(p->max_criterion_diff, "max_criterion_diff")},
                 {"overall_diff", json_number(p->overall_diff, "overall_diff")},
                 {"checklist_id", checklist_id(cl->second)}};
        out += canonical_line(rec);
    }
    return out;
}

namespace {

json histogram(const std::vector<double>& values) {
    // Ten bins of width 10 over [0,100]; 100 falls in the last bin.
    std::vector<std::size_t> bins(10, 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>(std::clamp(v, 0.0, 100.0) / 10.0);
        ++bins[std::min<std::size_t>(b, 9)];
    }
    json edges = json::array();
    for (int i = 0; i <= 10; ++i) edges.push_back(i * 10);
    return json{{"edges", std::move(edges)}, {"counts", bins}};
}

std::set<std::string> retained_ids(const std::vector<PreferencePair>& ranked) {
    std::set<std::string> ids;
    for (const auto& p : ranked) {
        if (p.retained) ids.insert(p.instruction_id);
    }
    return ids;
}

}  // namespace

json mining_summary(const std::vector<PreferencePair>& ranked, FilterStrategy strategy,
                    double retention_fraction, const MiningDiagnostics& diagnostics) {
    std::vector<double> max_all, overall_all, max_kept, overall_kept;
    for (const auto& p : ranked) {
        max_all.push_back(p.max_criterion_diff);
        overall_all.push_back(p.overall_diff);
        if (p.retained) {
            max_kept.push_back(p.max_criterion_diff);
            overall_kept.push_back(p.overall_diff);
        }
    }

    json dropped = json::object();
    for (auto reason : {PairDropReason::missing_aggregate, PairDropReason::tie,
                        PairDropReason::no_common_criterion}) {
        auto it = diagnostics.dropped.find(reason);
        dropped[std::string(to_string(reason))] = it == diagnostics.dropped.end() ? 0 : it->second;
    }

    json sweep = json::array();
    for (double f : {0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0}) {
        auto by_aspect = retained_ids(filter_pairs(ranked, FilterStrategy::max_single_aspect, f));
        auto by_overall = retained_ids(filter_pairs(ranked, FilterStrategy::overall_score, f));
        std::size_t overlap = 0;
        for (const auto& id : by_aspect) overlap += by_overall.count(id);
        sweep.push_back(json{{"fraction", json_number(f, "fraction")},
                             {"retained", retention_count(ranked.size(), f)},
                             {"strategy_overlap", overlap}});
    }

    return json{{"strategy", std::string(to_string(strategy))},
                {"retention_fraction", json_number(retention_fraction, "retention_fraction")},
                {"score_matrices", diagnostics.matrices},
                {"pairs_formed", ranked.size()},
                {"pairs_retained", max_kept.size()},
                {"pairs_dropped", std::move(dropped)},
                {"max_criterion_diff_histogram", {{"all", histogram(max_all)}, {"retained", histogram(max_kept)}}},
                {"overall_diff_histogram", {{"all", histogram(overall_all)}, {"retained", histogram(overall_kept)}}},
                {"retention_sweep", std::move(sweep)}};
}

}  // namespace checklist_forge
