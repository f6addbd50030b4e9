#include <doctest.h>

#include "checklist_forge/checklist_eval.hpp"
#include "checklist_forge/serialize.hpp"
#include "fakes.hpp"

using namespace checklist_forge;
using namespace test_support;

namespace {

const Instruction kInst{"i1", "Translate to Spanish: \"Hello how are you doing?\"", "fixture", 1};

Checklist checklist(ChecklistMethod method, std::vector<std::string> questions) {
    Checklist c{"i1", {}, method};
    for (std::size_t i = 0; i < questions.size(); ++i) {
        c.requirements.push_back({static_cast<int>(i), questions[i], 100.0, RequirementKind::generated, std::nullopt});
    }
    return inject_universal(c);
}

// Hand-built transcript store: every request the evaluator will make is
// answered from here, so the test never touches a backend.
std::shared_ptr<Gateway> replay_gateway(const std::filesystem::path& path,
                                        const std::vector<std::pair<TeacherRequest, std::vector<std::string>>>& entries) {
    auto store = std::make_shared<ReplayStore>(path.string());
    for (const auto& [req, completions] : entries) store->append(TeacherTranscript{fingerprint(req), completions, 0.0, "fixed"});
    return std::make_shared<Gateway>(nullptr, store, GatewayMode::replay, fast_options());
}

}  // namespace

TEST_CASE("comparison answers are read leniently") {
    CHECK(parse_comparison_completion("A") == Preference::prefer_a);
    CHECK(parse_comparison_completion(" **B**\n") == Preference::prefer_b);
    CHECK(parse_comparison_completion("tie.") == Preference::tie);
    CHECK(parse_comparison_completion("Checklist A") == std::nullopt);
    CHECK(parse_comparison_completion("") == std::nullopt);
}

TEST_CASE("rendered checklists show index, text and weight") {
    auto c = checklist(ChecklistMethod::direct, {"Is the generated text in Spanish?"});
    const auto text = render_checklist(c);
    CHECK(text.find("1. Is the generated text in Spanish? (weight: 100/100)") != std::string::npos);
    CHECK(text.find("2. Does the response satisfy") != std::string::npos);
}

TEST_CASE("quality scores and swap-debiased preference from a replay store") {
    TempDir dir;
    PipelineConfig cfg;
    cfg.judge_sample_count = 3;
    auto direct = checklist(ChecklistMethod::direct, {"Is it Spanish?"});
    auto cand = checklist(ChecklistMethod::candidate_based, {"Is it Spanish?", "Is the translation complete?"});

    // A probe evaluator (never called) builds the exact requests to record.
    auto probe_gateway = live_gateway(constant_backend("unused"));
    ChecklistEvaluator probe(*probe_gateway, cfg);
    std::vector<std::pair<TeacherRequest, std::vector<std::string>>> entries;
    const std::vector<std::vector<std::string>> direct_answers = {
        {"80", "90", "70"}, {"-1", "-1", "-1"}, {"50", "60", "70"}, {"90", "90", "90"}};
    for (std::size_t i = 0; i < kQualityMetrics.size(); ++i) {
        entries.push_back({probe.quality_request(kQualityMetrics[i], kInst, direct), direct_answers[i]});
        entries.push_back({probe.quality_request(kQualityMetrics[i], kInst, cand), {"95", "85", "90"}});
    }

    SUBCASE("consistent preference across both orders") {
        entries.push_back({probe.compare_request(kInst, direct, cand), {"B"}});
        entries.push_back({probe.compare_request(kInst, cand, direct), {"A"}});
        auto g = replay_gateway(dir / "store.jsonl", entries);
        ChecklistEvaluator eval(*g, cfg);

        auto q = eval.score_checklist_quality(kInst, direct);
        CHECK(*q[QualityMetric::naturalness] == 80.0);
        CHECK_FALSE(q[QualityMetric::objectiveness].has_value());
        CHECK(*q[QualityMetric::comprehensiveness] == 60.0);
        CHECK(q.notes.size() == 1);

        auto cmp = eval.compare_checklists(kInst, direct, cand);
        CHECK(cmp.original_order == Preference::prefer_b);
        CHECK(cmp.swapped_order == Preference::prefer_b);
        CHECK(cmp.outcome == Preference::prefer_b);

        ChecklistEvalRow row{"i1", q, eval.score_checklist_quality(kInst, cand), cmp};
        auto report = checklist_eval_report({row});
        CHECK(report["means"]["naturalness"]["direct"] == 80.0);
        CHECK(report["means"]["objectiveness"]["direct"].is_null());
        CHECK(report["means"]["preferred_overall_pct"]["candidate_based"] == 100.0);
        const auto table = format_eval_table(report);
        CHECK(table.find("% Preferred Overall") != std::string::npos);
        CHECK(table.find("n/a") != std::string::npos);
    }
    SUBCASE("position bias becomes a tie") {
        entries.push_back({probe.compare_request(kInst, direct, cand), {"A"}});
        entries.push_back({probe.compare_request(kInst, cand, direct), {"A"}});
        auto g = replay_gateway(dir / "store.jsonl", entries);
        ChecklistEvaluator eval(*g, cfg);
        auto cmp = eval.compare_checklists(kInst, direct, cand);
        CHECK(cmp.original_order == Preference::prefer_a);
        CHECK(cmp.swapped_order == Preference::prefer_b);
        CHECK(cmp.outcome == Preference::tie);
    }
    SUBCASE("unrecorded request is a replay miss") {
        auto g = replay_gateway(dir / "store.jsonl", entries);
        ChecklistEvaluator eval(*g, cfg);
        CHECK_THROWS_AS(eval.compare_checklists(kInst, direct, cand), ReplayMiss);
    }
}

TEST_CASE("invalid checklists are refused before any request") {
    auto backend = constant_backend("50");
    auto g = live_gateway(backend);
    PipelineConfig cfg;
    ChecklistEvaluator eval(*g, cfg);
    Checklist bad{"i1", {{0, "Is it Spanish?", 100, RequirementKind::generated, std::nullopt}}, ChecklistMethod::direct};
    CHECK_THROWS_AS(eval.score_checklist_quality(kInst, bad), std::invalid_argument);
    CHECK(backend->calls == 0);
    auto other = checklist(ChecklistMethod::direct, {"Q?"});
    other.instruction_id = "i2";
    CHECK_THROWS_AS(eval.compare_checklists(kInst, checklist(ChecklistMethod::direct, {"Q?"}), other),
                    std::invalid_argument);
}
