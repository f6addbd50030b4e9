#include <doctest.h>

#include <stdexcept>

#include "checklist_forge/model.hpp"

using namespace checklist_forge;

namespace {

Checklist two_item_checklist() {
    Checklist c;
    c.instruction_id = "i1";
    c.requirements = {{0, "Is the generated text in Spanish?", 100.0, RequirementKind::generated, std::nullopt},
                      {1, "Is the translation complete?", 75.0, RequirementKind::generated, std::nullopt}};
    return inject_universal(c);
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("inject_universal appends the canonical requirement last") {
    auto c = two_item_checklist();
    REQUIRE(c.requirements.size() == 3);
    const auto& u = c.requirements.back();
    CHECK(u.kind == RequirementKind::universal);
    CHECK(u.index == 2);
    CHECK(u.weight == 100.0);
    CHECK(u.text == kUniversalRequirementText);
    CHECK(validate_checklist(c).ok());
    CHECK(validate_checklist(c).warnings.empty());

    CHECK_THROWS_AS(inject_universal(c), std::logic_error);
    CHECK_THROWS_AS(inject_universal(Checklist{"x", {}, ChecklistMethod::direct}), std::invalid_argument);
}

TEST_CASE("validate_checklist reports each broken invariant") {
    SUBCASE("missing universal") {
        Checklist c{"i1", {{0, "Is it short?", 50.0, RequirementKind::generated, std::nullopt}}, ChecklistMethod::direct};
        CHECK(has(validate_checklist(c).errors, "exactly one universal requirement (found 0)"));
    }
    SUBCASE("weights and indices") {
        auto c = two_item_checklist();
        c.requirements[0].weight = 101.0;
        c.requirements[1].index = 7;
        auto r = validate_checklist(c);
        CHECK(has(r.errors, "req 0: weight out of range"));
        CHECK(has(r.errors, "req 1: index must be 1 (found 7)"));
    }
    SUBCASE("tampered universal") {
        auto c = two_item_checklist();
        c.requirements[2].weight = 90.0;
        c.requirements[2].verifier_source = "def f(x): return True";
        auto r = validate_checklist(c);
        CHECK(has(r.errors, "universal weight must be 100"));
        CHECK(has(r.errors, "cannot carry a verifier"));
    }
    SUBCASE("question form is only a warning") {
        auto c = two_item_checklist();
        c.requirements[1].text = "The translation is complete.";
        auto r = validate_checklist(c);
        CHECK(r.ok());
        CHECK(has(r.warnings, "req 1: not phrased as a question"));
    }
    SUBCASE("empty ids") {
        Checklist c;
        auto r = validate_checklist(c);
        CHECK(has(r.errors, "instruction_id empty"));
        CHECK(has(r.errors, "checklist empty"));
    }
}

TEST_CASE("enum names round-trip") {
    for (auto k : {FilterStrategy::max_single_aspect, FilterStrategy::overall_score}) {
        CHECK(filter_strategy_from_string(to_string(k)) == k);
    }
    for (auto k : {ProgramResult::pass, ProgramResult::fail, ProgramResult::error, ProgramResult::absent}) {
        CHECK(program_result_from_string(to_string(k)) == k);
    }
    CHECK(checklist_method_from_string("candidate_based") == ChecklistMethod::candidate_based);
    CHECK(slot_from_string("B") == Slot::B);
    CHECK(other_slot(Slot::A) == Slot::B);
    CHECK_THROWS_AS(slot_from_string("C"), std::invalid_argument);
}
