#include <doctest.h>

#include <chrono>

#include "checklist_forge/sandbox_client.hpp"
#include "checklist_forge/scoring.hpp"

using namespace checklist_forge;

namespace {

const std::string kSource = "def verify_requirement(text):\n    return 'yes' in text\n";

}  // namespace

TEST_CASE("wire lines round-trip") {
    auto spec = make_program_spec(kSource);
    CHECK(spec.entry_point == "verify_requirement");
    CHECK(spec.program_id.size() == 16);

    const auto preamble = encode_preamble(spec, SandboxLimits{1500, 128});
    const auto nl = preamble.find('\n');
    auto header = decode_preamble_header(preamble.substr(0, nl));
    CHECK(header.program_id == spec.program_id);
    CHECK(header.entry_point == "verify_requirement");
    CHECK(header.length == kSource.size());
    CHECK(header.limits.timeout_ms == 1500);
    CHECK(header.limits.memory_mb == 128);
    CHECK(preamble.substr(nl + 1) == kSource);

    WireRequest req{spec.program_id, "3", "multi\nline \"text\" ✓"};
    const auto line = encode_request_line(req);
    CHECK(line.back() == '\n');
    CHECK(std::count(line.begin(), line.end(), '\n') == 1);
    CHECK(decode_request_line(line) == req);

    WireVerdict v{"3", {VerdictStatus::error, "Traceback", 12.5}};
    CHECK(decode_verdict_line(encode_verdict_line(v)) == v);
    CHECK_THROWS_AS(decode_verdict_line(R"({"response_id":"1","status":"maybe","wall_ms":1,"detail":null})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(decode_preamble_header("not json"), std::invalid_argument);
    CHECK_THROWS_AS(make_program_spec("x = 1\n"), std::invalid_argument);
}

TEST_CASE("verdicts map onto program results") {
    CHECK(to_program_result(SandboxVerdict{VerdictStatus::pass, {}, 0}) == ProgramResult::pass);
    CHECK(to_program_result(SandboxVerdict{VerdictStatus::fail, {}, 0}) == ProgramResult::fail);
    CHECK(to_program_result(SandboxVerdict{VerdictStatus::timeout, {}, 0}) == ProgramResult::error);
    CHECK(to_program_result(std::nullopt) == ProgramResult::absent);
}

TEST_CASE("null executor never runs anything") {
    NullExecutor ex;
    const std::vector<std::string> responses = {"a", "b"};
    auto out = ex.execute(make_program_spec(kSource), responses, {});
    REQUIRE(out.size() == 2);
    CHECK_FALSE(out[0]);
    CHECK_FALSE(out[1]);
}

TEST_CASE("subprocess executor speaks the protocol to a child") {
    SubprocessExecutor ex({FAKE_SANDBOX_CHILD}, /*grace_ms=*/100);
    const auto spec = make_program_spec(kSource);

    SUBCASE("pass, fail and error verdicts in order") {
        const std::vector<std::string> responses = {"yes please", "no thanks", "boom", "yes again"};
        auto out = ex.execute(spec, responses, SandboxLimits{500, 64});
        REQUIRE(out.size() == 4);
        CHECK(out[0]->status == VerdictStatus::pass);
        CHECK(out[1]->status == VerdictStatus::fail);
        CHECK(out[2]->status == VerdictStatus::error);
        CHECK(out[2]->detail == std::optional<std::string>("ZeroDivisionError: division by zero"));
        CHECK(out[3]->status == VerdictStatus::pass);
    }
    SUBCASE("a hung response times out and the child is replaced") {
        const std::vector<std::string> responses = {"yes", "hang", "yes", "no"};
        const auto start = std::chrono::steady_clock::now();
        auto out = ex.execute(spec, responses, SandboxLimits{200, 64});
        const auto elapsed = std::chrono::steady_clock::now() - start;
        CHECK(elapsed < std::chrono::seconds(5));
        REQUIRE(out.size() == 4);
        CHECK(out[0]->status == VerdictStatus::pass);
        CHECK(out[1]->status == VerdictStatus::timeout);
        CHECK(out[2]->status == VerdictStatus::pass);
        CHECK(out[3]->status == VerdictStatus::fail);
    }
    SUBCASE("a crashing child yields an error with its stderr and later responses still run") {
        const std::vector<std::string> responses = {"crash", "yes"};
        auto out = ex.execute(spec, responses, SandboxLimits{500, 64});
        REQUIRE(out.size() == 2);
        CHECK(out[0]->status == VerdictStatus::error);
        REQUIRE(out[0]->detail);
        CHECK(out[0]->detail->find("crashed on purpose") != std::string::npos);
        CHECK(out[0]->detail->size() <= kMaxDetailBytes);
        CHECK(out[1]->status == VerdictStatus::pass);
    }
    SUBCASE("the fused score falls back to the judge on sandbox error") {
        const std::vector<std::string> responses = {"boom"};
        auto out = ex.execute(spec, responses, SandboxLimits{500, 64});
        ScoreCell cell;
        cell.judge_mean = 42.0;
        auto fused = fuse(cell, out[0]);
        CHECK(*fused.combined == 42.0);
        CHECK(fused.note.find("ZeroDivisionError") != std::string::npos);
    }
}

TEST_CASE("a missing sandbox binary yields error verdicts, not a crash") {
    SubprocessExecutor ex({"/nonexistent/sandbox-child"});
    const std::vector<std::string> responses = {"a"};
    auto out = ex.execute(make_program_spec(kSource), responses, SandboxLimits{200, 64});
    REQUIRE(out.size() == 1);
    REQUIRE(out[0]);
    CHECK(out[0]->status == VerdictStatus::error);
}
