/// @file sim_teacher.hpp
/// @brief Offline stand-in for the teacher and policy endpoints.
///
/// Recognises each pipeline prompt and answers in the expected format with
/// plausible, deterministic content derived from the request. Meant for
/// smoke runs and for recording replay fixtures without network access
/// (endpoint "sim://"). It is not a model and its scores mean nothing.

#pragma once

#include <cstdint>

#include "checklist_forge/gateway.hpp"

namespace checklist_forge {

class SimulatedTeacher : public TeacherBackend {
public:
    explicit SimulatedTeacher(std::uint64_t seed = 0) : seed_(seed) {}

    std::vector<std::string> complete(const TeacherRequest& request) override;

private:
    std::uint64_t seed_;
};

}  // namespace checklist_forge
