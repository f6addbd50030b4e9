#pragma once

#include <optional>
#include <string>
#include <vector>

namespace checklist_forge {

/// Result of a per-record pipeline step. Failures are data: a failed record
/// carries the reason and is skipped, it never aborts the batch.
template <class T>
struct Outcome {
    std::optional<T> value;
    std::vector<std::string> warnings;
    std::string failure;

    bool ok() const { return value.has_value(); }

    static Outcome failed(std::string reason, std::vector<std::string> warnings = {}) {
        Outcome o;
        o.failure = std::move(reason);
        o.warnings = std::move(warnings);
        return o;
    }
};

}  // namespace checklist_forge
