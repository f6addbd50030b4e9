#include <doctest.h>

#include "checklist_forge/checklist_gen.hpp"
#include "checklist_forge/config.hpp"
#include "fakes.hpp"

using namespace checklist_forge;
using namespace test_support;

namespace {

const Instruction kDense{"dense", "make a sentence with \"dense\"", "fixture", 1};

bool has(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("parses the numbered weighted-list format") {
    auto p = parse_checklist_completion(
        "1. Does the generated text contain the word \"dense\"? (weight: 100/100)\n"
        "2. Is the generated text a coherent and grammatically correct sentence? (weight: 75/100)\n",
        12);
    REQUIRE(p.items.size() == 2);
    CHECK(p.items[0].text == "Does the generated text contain the word \"dense\"?");
    CHECK(p.items[0].weight == 100.0);
    CHECK(p.items[1].weight == 75.0);
    CHECK(p.warnings.empty());
}

TEST_CASE("tolerates formatting drift") {
    auto p = parse_checklist_completion(
        "Here is the checklist:\n"
        "- **Is the text concise?** [weight: 60]\n"
        "* Does it cite a source? Weight=90/100\n"
        "3) Is the tone friendly? (Weight: 80 / 100).\n"
        "Some closing remark.\n",
        12);
    REQUIRE(p.items.size() == 3);
    CHECK(p.items[0].text == "Is the text concise?");
    CHECK(p.items[0].weight == 60.0);
    CHECK(p.items[1].weight == 90.0);
    CHECK(p.items[2].text == "Is the tone friendly?");
    CHECK(p.items[2].weight == 80.0);
}

TEST_CASE("missing weight defaults to 75 and out-of-range weights are clamped") {
    auto p = parse_checklist_completion("1. Is it short?\n2. Is it in Spanish? (weight: 120/100)\n3. Odd? (weight: -5/100)\n", 12);
    REQUIRE(p.items.size() == 3);
    CHECK(p.items[0].weight == 75.0);
    CHECK(p.items[1].weight == 100.0);
    CHECK(p.items[2].weight == 0.0);
    CHECK(has(p.warnings, "item 1: missing weight, defaulted to 75"));
    CHECK(has(p.warnings, "item 2: weight 120 clamped to 100"));
    CHECK(has(p.warnings, "clamped to 0"));
}

TEST_CASE("items beyond the cap are dropped from the tail") {
    std::string text;
    for (int i = 1; i <= 15; ++i) text += std::to_string(i) + ". Question " + std::to_string(i) + "? (weight: 50/100)\n";
    auto p = parse_checklist_completion(text, 12);
    REQUIRE(p.items.size() == 12);
    CHECK(p.items.back().text == "Question 12?");
    CHECK(has(p.warnings, "dropped 3 items"));
}

TEST_CASE("direct generation: three items become four requirements") {
    auto backend = constant_backend(
        "1. Does the generated text contain the word \"dense\"? (weight: 100/100)\n"
        "2. Is it a single sentence? (weight: 90/100)\n"
        "3. Is the generated text grammatically correct? (weight: 75/100)\n");
    auto g = live_gateway(backend);
    PipelineConfig cfg;
    ChecklistGenerator gen(*g, cfg);
    auto out = gen.generate_direct(kDense);
    REQUIRE(out.ok());
    const auto& c = *out.value;
    REQUIRE(c.requirements.size() == 4);
    CHECK(c.method == ChecklistMethod::direct);
    CHECK(c.requirements[3].kind == RequirementKind::universal);
    CHECK(c.requirements[3].text == kUniversalRequirementText);
    CHECK(validate_checklist(c).ok());

    REQUIRE(backend->seen.size() == 1);
    const auto& req = backend->seen[0];
    CHECK(req.model == cfg.teacher_model);
    CHECK(req.temperature == cfg.checklist_temperature);
    CHECK(req.messages.back().content.find(kDense.text) != std::string::npos);
}

TEST_CASE("unparseable completion gets one reprompt, then the instruction is skipped") {
    auto backend = constant_backend("I cannot help with that.");
    auto g = live_gateway(backend);
    PipelineConfig cfg;
    ChecklistGenerator gen(*g, cfg);
    auto out = gen.generate_direct(kDense);
    CHECK_FALSE(out.ok());
    CHECK(out.failure.find("unparseable") != std::string::npos);
    CHECK(backend->calls == 2);
    CHECK(backend->seen[1].messages.size() == 3);
}

TEST_CASE("blank instructions are rejected before any teacher call") {
    auto backend = constant_backend("1. x? (weight: 1/100)");
    auto g = live_gateway(backend);
    PipelineConfig cfg;
    ChecklistGenerator gen(*g, cfg);
    CHECK_THROWS_AS(gen.generate_direct(Instruction{"b", "   \n", "", 1}), std::invalid_argument);
    CHECK(backend->calls == 0);
}

TEST_CASE("candidate-based generation shows the candidate ladder to the teacher") {
    PipelineConfig cfg;
    auto backend = std::make_shared<ScriptedBackend>([&](const TeacherRequest& r) {
        if (r.model != cfg.teacher_model) return std::vector<std::string>{"answer from " + r.model + std::string(3000, 'x')};
        return std::vector<std::string>{"1. Does it contain \"dense\"? (weight: 100/100)\n"};
    });
    auto g = live_gateway(backend);
    ChecklistGenerator gen(*g, cfg);
    auto out = gen.generate(kDense, ChecklistMethod::candidate_based);
    REQUIRE(out.ok());
    CHECK(out.value->method == ChecklistMethod::candidate_based);
    CHECK(out.value->requirements.size() == 2);

    REQUIRE(backend->seen.size() == cfg.candidate_model_set.size() + 1);
    std::string teacher_prompt;
    for (const auto& r : backend->seen) {
        if (r.model == cfg.teacher_model) teacher_prompt = r.messages.back().content;
    }
    for (std::size_t i = 0; i < cfg.candidate_model_set.size(); ++i) {
        CHECK(teacher_prompt.find("Response " + std::to_string(i + 1) + ":") != std::string::npos);
    }
    // Each candidate is truncated to the configured size before prompting.
    CHECK(teacher_prompt.find(std::string(static_cast<std::size_t>(cfg.candidate_truncate_chars), 'x')) == std::string::npos);
}

TEST_CASE("candidate set fails when fewer than two candidates succeed") {
    PipelineConfig cfg;
    auto backend = std::make_shared<ScriptedBackend>([&](const TeacherRequest& r) -> std::vector<std::string> {
        if (r.model == cfg.candidate_model_set[0]) return {"only one"};
        throw EndpointFailure("down");
    });
    auto g = live_gateway(backend);
    ChecklistGenerator gen(*g, cfg);
    auto out = gen.generate_candidates(kDense);
    CHECK_FALSE(out.ok());
}
