/// @file sandbox_client.hpp
/// @brief Parent side of the verifier sandbox: the line-delimited wire
/// protocol and executors that run screened programs against responses.
///
/// Wire protocol (one child per program batch):
///   1. Parent writes a framed preamble: one JSON header line
///      {"entry_point","length","memory_mb","program_id","timeout_ms"}
///      followed by exactly `length` bytes of program source.
///   2. Per response, parent writes one line
///      {"program_id","response_id","response_text"}
///      and the child answers one line {"detail","response_id","status","wall_ms"}
///      with status in pass|fail|error|timeout.
///   3. Parent closes stdin; the child exits with code 0.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "checklist_forge/model.hpp"

namespace checklist_forge {

enum class VerdictStatus { pass, fail, error, timeout };

struct SandboxVerdict {
    VerdictStatus status = VerdictStatus::error;
    std::optional<std::string> detail;
    double wall_ms = 0.0;

    bool operator==(const SandboxVerdict&) const = default;
};

struct SandboxLimits {
    int timeout_ms = 2000;
    int memory_mb = 256;
};

struct ProgramSpec {
    std::string program_id;
    std::string source;
    std::string entry_point;
};

/// Builds a ProgramSpec with a content-derived id. Throws
/// std::invalid_argument when the source has no single predicate.
ProgramSpec make_program_spec(const std::string& source);

std::string_view to_string(VerdictStatus status);
VerdictStatus verdict_status_from_string(std::string_view s);

/// pass/fail map to themselves; error, timeout and no verdict do not count
/// as a program score.
ProgramResult to_program_result(const std::optional<SandboxVerdict>& verdict);

inline constexpr std::size_t kMaxDetailBytes = 2048;

// Wire encoding. Lines include the trailing '\n'. Decoders throw
// std::invalid_argument on malformed input.
struct PreambleHeader {
    std::string program_id;
    std::string entry_point;
    std::size_t length = 0;
    SandboxLimits limits;
};

struct WireRequest {
    std::string program_id;
    std::string response_id;
    std::string response_text;

    bool operator==(const WireRequest&) const = default;
};

struct WireVerdict {
    std::string response_id;
    SandboxVerdict verdict;

    bool operator==(const WireVerdict&) const = default;
};

std::string encode_preamble(const ProgramSpec& program, const SandboxLimits& limits);
PreambleHeader decode_preamble_header(std::string_view line);
std::string encode_request_line(const WireRequest& request);
WireRequest decode_request_line(std::string_view line);
std::string encode_verdict_line(const WireVerdict& verdict);
WireVerdict decode_verdict_line(std::string_view line);

/// Runs one program against many responses. Implementations must be safe to
/// call from several threads at once.
class VerifierExecutor {
public:
    virtual ~VerifierExecutor() = default;
    /// One entry per response, in input order; nullopt means "not executed".
    virtual std::vector<std::optional<SandboxVerdict>> execute(
        const ProgramSpec& program, std::span<const std::string> responses,
        const SandboxLimits& limits) = 0;
};

/// Used when no sandbox is configured: every program result is absent.
class NullExecutor : public VerifierExecutor {
public:
    std::vector<std::optional<SandboxVerdict>> execute(const ProgramSpec& program,
                                                       std::span<const std::string> responses,
                                                       const SandboxLimits& limits) override;
};

/// Spawns `argv` as a child process per program batch and speaks the wire
/// protocol over its stdin/stdout. The child gets its own process group and a
/// fresh temporary working directory. A response with no reply within
/// timeout_ms + grace_ms is a timeout: the process group is killed and a new
/// child serves the remaining responses.
class SubprocessExecutor : public VerifierExecutor {
public:
    explicit SubprocessExecutor(std::vector<std::string> argv, int grace_ms = 500);

    std::vector<std::optional<SandboxVerdict>> execute(const ProgramSpec& program,
                                                       std::span<const std::string> responses,
                                                       const SandboxLimits& limits) override;

private:
    std::vector<std::string> argv_;
    std::string resolved_;
    int grace_ms_;
};

}  // namespace checklist_forge
