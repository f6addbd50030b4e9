#include <doctest.h>

#include "checklist_forge/pair_miner.hpp"
#include "checklist_forge/serialize.hpp"

using namespace checklist_forge;

namespace {

ScoreMatrix matrix(const std::string& id, const std::vector<MaybeScore>& a, const std::vector<MaybeScore>& b,
                   MaybeScore agg_a, MaybeScore agg_b) {
    ScoreMatrix m;
    m.instruction_id = id;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ScoreCell ca, cb;
        ca.combined = a[i];
        cb.combined = b[i];
        m.cells[{Slot::A, static_cast<int>(i)}] = ca;
        m.cells[{Slot::B, static_cast<int>(i)}] = cb;
    }
    m.aggregate[Slot::A] = agg_a;
    m.aggregate[Slot::B] = agg_b;
    return m;
}

PreferencePair pair_with(const std::string& id, double max_diff, double overall) {
    PreferencePair p;
    p.instruction_id = id;
    p.max_criterion_diff = max_diff;
    p.overall_diff = overall;
    p.chosen_score = 50 + overall;
    p.rejected_score = 50;
    return p;
}

std::vector<std::string> retained_ids(const std::vector<PreferencePair>& ranked) {
    std::vector<std::string> out;
    for (const auto& p : ranked) {
        if (p.retained) out.push_back(p.instruction_id);
    }
    return out;
}

}  // namespace

TEST_CASE("higher aggregate is chosen and diffs come from commonly scored cells") {
    auto out = form_pair(matrix("x", {90.0, 10.0, kMissing}, {20.0, 30.0, 100.0}, 60.0, 40.0));
    REQUIRE(out.pair);
    CHECK(out.pair->chosen_slot == Slot::A);
    CHECK(out.pair->rejected_slot == Slot::B);
    CHECK(out.pair->chosen_score == 60.0);
    CHECK(out.pair->rejected_score == 40.0);
    CHECK(out.pair->max_criterion_diff == 70.0);
    CHECK(out.pair->overall_diff == 20.0);

    auto flipped = form_pair(matrix("x", {10.0}, {20.0}, 10.0, 20.0));
    REQUIRE(flipped.pair);
    CHECK(flipped.pair->chosen_slot == Slot::B);
}

TEST_CASE("no pair on ties, missing aggregates or no common criterion") {
    CHECK(form_pair(matrix("t", {50.0}, {60.0}, 55.0, 55.0)).reason == PairDropReason::tie);
    CHECK(form_pair(matrix("m", {50.0}, {60.0}, kMissing, 55.0)).reason == PairDropReason::missing_aggregate);
    CHECK(form_pair(matrix("n", {50.0, kMissing}, {kMissing, 60.0}, 50.0, 60.0)).reason ==
          PairDropReason::no_common_criterion);
}

TEST_CASE("max-single-aspect keeps the top 40 percent by largest criterion diff") {
    const std::vector<double> diffs = {90, 5, 40, 2, 70};
    std::vector<PreferencePair> pairs;
    for (std::size_t i = 0; i < diffs.size(); ++i) pairs.push_back(pair_with("p" + std::to_string(i), diffs[i], 1.0));
    auto ranked = filter_pairs(pairs, FilterStrategy::max_single_aspect, 0.4);
    REQUIRE(ranked.size() == 5);
    CHECK(ranked[0].max_criterion_diff == 90);
    CHECK(ranked[1].max_criterion_diff == 70);
    CHECK(retained_ids(ranked) == std::vector<std::string>{"p0", "p4"});
}

TEST_CASE("overall strategy ranks by aggregate difference; ties break by id") {
    std::vector<PreferencePair> pairs = {pair_with("c", 99, 10), pair_with("a", 1, 30), pair_with("b", 1, 30)};
    auto ranked = filter_pairs(pairs, FilterStrategy::overall_score, 0.5);
    CHECK(retained_ids(ranked) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("retention count is a ceiling with at least one pair kept") {
    CHECK(retention_count(1, 0.4) == 1);
    CHECK(retention_count(1, 0.1) == 1);
    CHECK(retention_count(30, 0.1) == 3);
    CHECK(retention_count(10, 0.4) == 4);
    CHECK(retention_count(11, 0.4) == 5);
    CHECK(retention_count(7, 1.0) == 7);
    CHECK(retention_count(0, 0.4) == 0);
    CHECK_THROWS_AS(filter_pairs({}, FilterStrategy::overall_score, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(filter_pairs({}, FilterStrategy::overall_score, 1.5), std::invalid_argument);
    auto one = filter_pairs({pair_with("only", 1, 1)}, FilterStrategy::max_single_aspect, 0.4);
    CHECK(one[0].retained);
}

TEST_CASE("export joins retained pairs with their text and fails loudly on dangling references") {
    ExportInputs in;
    in.instructions["i1"] = Instruction{"i1", "make a sentence with \"dense\"", "s", 1};
    in.responses["i1"][Slot::A] = Response{"i1", Slot::A, "The forest was dense.", {1.3, 0.9}};
    in.responses["i1"][Slot::B] = Response{"i1", Slot::B, "Trees.", {1.3, 0.9}};
    Checklist c{"i1", {{0, "Does it contain \"dense\"?", 100, RequirementKind::generated, std::nullopt}},
                ChecklistMethod::direct};
    in.checklists["i1"] = inject_universal(c);

    PreferencePair p = pair_with("i1", 50, 20);
    p.retained = true;
    const auto line = export_preferences({p}, in);
    const auto rec = json::parse(line);
    CHECK(rec["chosen"] == "The forest was dense.");
    CHECK(rec["rejected"] == "Trees.");
    CHECK(rec["instruction"] == "make a sentence with \"dense\"");
    CHECK(rec["checklist_id"] == checklist_id(in.checklists["i1"]));
    CHECK(rec["checklist_id"].get<std::string>().size() == 16);

    PreferencePair dropped = p;
    dropped.retained = false;
    CHECK(export_preferences({dropped}, in).empty());

    in.responses["i1"].erase(Slot::B);
    try {
        export_preferences({p}, in);
        FAIL("expected ExportError");
    } catch (const ExportError& e) {
        CHECK(std::string(e.what()).find("i1") != std::string::npos);
        CHECK(std::string(e.what()).find("slot B") != std::string::npos);
    }
    PreferencePair ghost = pair_with("ghost", 1, 1);
    ghost.retained = true;
    CHECK_THROWS_AS(export_preferences({ghost}, in), ExportError);
}

TEST_CASE("mining summary sweeps retention fractions for both strategies") {
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 10; ++i) pairs.push_back(pair_with("p" + std::to_string(i), i * 10.0, 100.0 - i * 10.0));
    auto ranked = filter_pairs(pairs, FilterStrategy::max_single_aspect, 0.4);
    MiningDiagnostics d;
    d.matrices = 12;
    d.dropped[PairDropReason::tie] = 2;
    auto s = mining_summary(ranked, FilterStrategy::max_single_aspect, 0.4, d);
    const auto dump = s.dump();
    CHECK(dump.find("\"tie\":2") != std::string::npos);
    bool saw_full = false;
    for (const auto& row : s["retention_sweep"]) {
        if (row["fraction"] == 1.0) {
            saw_full = true;
            CHECK(row["retained"] == 10);
            CHECK(row["strategy_overlap"] == 10);
        }
    }
    CHECK(saw_full);
}
