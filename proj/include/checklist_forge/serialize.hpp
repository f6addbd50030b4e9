/// @file serialize.hpp
/// @brief Canonical line encoding for stage files.
///
/// Each record is one JSON object per line with keys in sorted order, no
/// insignificant whitespace, and floating-point values rounded to 6 decimal
/// places. MISSING scores are encoded as `null`. Equal values always encode
/// to identical bytes.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "checklist_forge/model.hpp"

namespace checklist_forge {

using json = nlohmann::json;

class SerializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rounds to 6 decimals and rejects NaN/inf. `field` names the offending
/// field in the error message.
json json_number(double value, std::string_view field);
json json_score(const MaybeScore& score, std::string_view field);
MaybeScore score_from_json(const json& j);

void to_json(json& j, const Instruction& v);
void from_json(const json& j, Instruction& v);
void to_json(json& j, const Requirement& v);
void from_json(const json& j, Requirement& v);
void to_json(json& j, const Checklist& v);
void from_json(const json& j, Checklist& v);
void to_json(json& j, const SamplerParams& v);
void from_json(const json& j, SamplerParams& v);
void to_json(json& j, const Response& v);
void from_json(const json& j, Response& v);
void to_json(json& j, const ScoreCell& v);
void from_json(const json& j, ScoreCell& v);
void to_json(json& j, const ScoreMatrix& v);
void from_json(const json& j, ScoreMatrix& v);
void to_json(json& j, const PreferencePair& v);
void from_json(const json& j, PreferencePair& v);

/// Compact sorted-key dump followed by a newline.
std::string canonical_line(const json& j);

template <class T>
std::string canonical_serialize(const T& record) {
    json j = record;
    return canonical_line(j);
}

/// Parses one line. Throws SerializationError on malformed input.
template <class T>
T deserialize(std::string_view line) {
    try {
        return json::parse(line).get<T>();
    } catch (const json::exception& e) {
        throw SerializationError(std::string("deserialize failed: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SerializationError(std::string("deserialize failed: ") + e.what());
    }
}

}  // namespace checklist_forge
