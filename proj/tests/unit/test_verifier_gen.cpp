#include <doctest.h>

#include <fstream>

#include "checklist_forge/serialize.hpp"
#include "checklist_forge/verifier_gen.hpp"
#include "fakes.hpp"

using namespace checklist_forge;
using namespace test_support;

namespace {

VerifierParseKind kind_from(const std::string& s) {
    if (s == "code") return VerifierParseKind::code;
    if (s == "defer") return VerifierParseKind::defer;
    return VerifierParseKind::malformed;
}

const Instruction kInst{"i1", "make a sentence with \"dense\"", "fixture", 1};
const Requirement kReq{0, "Does the generated text contain the word \"dense\"?", 100.0, RequirementKind::generated,
                       std::nullopt};

}  // namespace

TEST_CASE("completion fixtures are classified as documented") {
    auto cases = json::parse(read_file(std::string(FIXTURE_DIR) + "/verifier_completions.json"));
    REQUIRE(cases.size() >= 10);
    for (const auto& c : cases) {
        INFO(c["name"].get<std::string>());
        auto parsed = parse_verifier_completion(c["completion"].get<std::string>());
        CHECK(parsed.kind == kind_from(c["expected"].get<std::string>()));
        if (parsed.kind == VerifierParseKind::code) {
            CHECK(parsed.source.find("```") == std::string::npos);
            CHECK(parsed.source.rfind("python", 0) == std::string::npos);
            CHECK(screen_verifier_source(parsed.source).accepted);
        }
    }
}

TEST_CASE("screening accepts plain predicates over allowlisted modules") {
    auto r = screen_verifier_source(
        "import re, string\nfrom collections import Counter\n\n"
        "def verify_requirement(text):\n"
        "    # no 'open(' calls here, and \"socket\" only in a string\n"
        "    words = re.findall(r'\\w+', text)\n"
        "    return Counter(words).most_common(1)[0][1] < 3 and 'import os' not in text\n");
    CHECK(r.accepted);
    CHECK(r.entry_point == "verify_requirement");
}

TEST_CASE("screening rejects a program that opens a network socket") {
    auto r = screen_verifier_source(read_file(std::string(FIXTURE_DIR) + "/socket_verifier.py"));
    CHECK_FALSE(r.accepted);
    CHECK(r.reason.find("socket") != std::string::npos);
}

TEST_CASE("screening rejects dangerous or ill-shaped programs") {
    const std::vector<std::string> rejected = {
        "import os\ndef f(text):\n    return True\n",
        "from subprocess import run\ndef f(text):\n    return True\n",
        "def f(text):\n    return open('/etc/passwd').read() in text\n",
        "def f(text):\n    return eval(text)\n",
        "def f(text):\n    return __import__('os') is None\n",
        "def f(text):\n    return text.__class__.__subclasses__() == []\n",
        "def f(text):\n    return f\"{__import__('os')}\" == text\n",
        "def f(text, other):\n    return True\n",
        "def f(text):\n    return True\ndef g(text):\n    return False\n",
        "x = 1\n",
        "def f(text):\n    return True\n" + std::string(4000, '#'),
        "from . import helper\ndef f(text):\n    return True\n",
    };
    for (const auto& src : rejected) {
        INFO(src.substr(0, 80));
        CHECK_FALSE(screen_verifier_source(src).accepted);
    }
}

TEST_CASE("nested helpers do not count as extra entry points") {
    auto r = screen_verifier_source(
        "def verify_requirement(text):\n    def inner(c):\n        return c.isupper()\n    return all(inner(c) for c in text if c.isalpha())\n");
    CHECK(r.accepted);
    CHECK(r.entry_point == "verify_requirement");
}

TEST_CASE("generator keeps programs, defers, and reprompts once on malformed output") {
    PipelineConfig cfg;
    SUBCASE("program") {
        auto g = live_gateway(constant_backend("```python\ndef verify_requirement(text):\n    return 'dense' in text\n```"));
        VerifierGenerator gen(*g, cfg);
        auto r = gen.generate_verifier(kInst, kReq);
        CHECK(r.status == VerifierStatus::program);
        REQUIRE(r.source);
        CHECK(r.source->find("'dense' in text") != std::string::npos);
    }
    SUBCASE("deferral") {
        auto g = live_gateway(constant_backend("defer to human expert ####"));
        VerifierGenerator gen(*g, cfg);
        auto r = gen.generate_verifier(kInst, kReq);
        CHECK(r.status == VerifierStatus::deferred);
        CHECK_FALSE(r.source);
    }
    SUBCASE("screened out") {
        auto g = live_gateway(constant_backend("```python\nimport os\ndef f(text):\n    return True\n```"));
        VerifierGenerator gen(*g, cfg);
        auto r = gen.generate_verifier(kInst, kReq);
        CHECK(r.status == VerifierStatus::screened_out);
        CHECK_FALSE(r.source);
        CHECK_FALSE(r.warnings.empty());
    }
    SUBCASE("malformed twice") {
        auto backend = constant_backend("I think this is subjective.");
        auto g = live_gateway(backend);
        VerifierGenerator gen(*g, cfg);
        auto r = gen.generate_verifier(kInst, kReq);
        CHECK(r.status == VerifierStatus::malformed);
        CHECK_FALSE(r.source);
        CHECK(backend->calls == 2);
    }
    SUBCASE("request shape") {
        auto backend = constant_backend("NONE");
        auto g = live_gateway(backend);
        VerifierGenerator gen(*g, cfg);
        gen.generate_verifier(kInst, kReq);
        REQUIRE(backend->seen.size() == 1);
        CHECK(backend->seen[0].temperature == cfg.verifier_temperature);
        CHECK(backend->seen[0].messages.back().content.find(kReq.text) != std::string::npos);
        CHECK(backend->seen[0].messages.back().content.find(kInst.text) != std::string::npos);
    }
    SUBCASE("universal requirement is never sent") {
        auto backend = constant_backend("NONE");
        auto g = live_gateway(backend);
        VerifierGenerator gen(*g, cfg);
        Requirement u{1, std::string(kUniversalRequirementText), 100.0, RequirementKind::universal, std::nullopt};
        CHECK_THROWS_AS(gen.generate_verifier(kInst, u), std::invalid_argument);
        CHECK(backend->calls == 0);
    }
}

TEST_CASE("batch stats report the program fraction") {
    VerifierBatchStats s;
    tally(s, VerifierResult{"def f(t): return True", VerifierStatus::program, {}});
    tally(s, VerifierResult{std::nullopt, VerifierStatus::deferred, {}});
    tally(s, VerifierResult{std::nullopt, VerifierStatus::deferred, {}});
    tally(s, VerifierResult{std::nullopt, VerifierStatus::malformed, {}});
    CHECK(s.requirements == 4);
    CHECK(s.program_fraction() == 0.25);
}
