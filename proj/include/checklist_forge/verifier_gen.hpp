/// @file verifier_gen.hpp
/// @brief Verification-program generation: asks the teacher whether a
/// requirement can be checked exactly by a program, parses the strict
/// code-fence / deferral protocol and screens the returned source.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "checklist_forge/config.hpp"
#include "checklist_forge/gateway.hpp"
#include "checklist_forge/model.hpp"
#include "checklist_forge/outcome.hpp"

namespace checklist_forge {

inline constexpr std::string_view kDeferralMarker = "defer to human expert ####";
inline constexpr std::size_t kMaxVerifierSourceChars = 4000;

enum class VerifierParseKind { code, defer, malformed };

struct VerifierParse {
    VerifierParseKind kind = VerifierParseKind::malformed;
    std::string source;  // set for `code`
};

/// Total classification of a teacher completion:
///  - code: exactly one fenced block and no deferral marker;
///  - defer: the deferral marker (or a bare "NONE") and no fence;
///  - malformed: anything else, including two blocks or both signals.
/// A language tag on the opening fence line is stripped from the source.
VerifierParse parse_verifier_completion(std::string_view completion);

struct ScreenResult {
    bool accepted = false;
    std::string entry_point;  // name of the single top-level predicate
    std::string reason;       // why it was rejected
};

/// Static screening before a program may run: size cap, import allowlist,
/// no filesystem/network/process/introspection primitives, and exactly one
/// top-level function taking one argument. String literals and comments are
/// ignored when scanning for primitives.
ScreenResult screen_verifier_source(std::string_view source);

/// Name of the single top-level `def`, or empty if there is not exactly one.
std::string verifier_entry_point(std::string_view source);

struct VerifierBatchStats {
    std::size_t requirements = 0;  // generated requirements considered
    std::size_t with_program = 0;
    std::size_t deferred = 0;
    std::size_t screened_out = 0;
    std::size_t malformed = 0;
    std::size_t failures = 0;

    double program_fraction() const {
        return requirements == 0 ? 0.0 : static_cast<double>(with_program) / requirements;
    }
};

enum class VerifierStatus { program, deferred, screened_out, malformed, teacher_failure };

struct VerifierResult {
    std::optional<std::string> source;
    VerifierStatus status = VerifierStatus::deferred;
    std::vector<std::string> warnings;
};

class VerifierGenerator {
public:
    VerifierGenerator(Gateway& gateway, const PipelineConfig& config);

    /// Throws std::invalid_argument for a universal requirement. Malformed
    /// completions get one reprompt and then defer. ReplayMiss propagates.
    VerifierResult generate_verifier(const Instruction& instruction, const Requirement& requirement);

    TeacherRequest request_for(const Instruction& instruction, const Requirement& requirement) const;

private:
    Gateway& gateway_;
    const PipelineConfig& config_;
};

void tally(VerifierBatchStats& stats, const VerifierResult& result);

}  // namespace checklist_forge
