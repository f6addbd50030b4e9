#include "checklist_forge/serialize.hpp"

#include <cmath>

namespace checklist_forge {

json json_number(double value, std::string_view field) {
    if (!std::isfinite(value)) {
        throw SerializationError("non-finite value in field '" + std::string(field) + "'");
    }
    double rounded = std::round(value * 1e6) / 1e6;
    if (rounded == 0.0) rounded = 0.0;  // drop negative zero
    return rounded;
}

json json_score(const MaybeScore& score, std::string_view field) {
    if (!score) return nullptr;
    return json_number(*score, field);
}

MaybeScore score_from_json(const json& j) {
    if (j.is_null()) return kMissing;
    return j.get<double>();
}

std::string canonical_line(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::strict) + "\n";
}

void to_json(json& j, const Instruction& v) {
    j = json{{"id", v.id}, {"text", v.text}, {"source", v.source}, {"turn_count", v.turn_count}};
}

void from_json(const json& j, Instruction& v) {
    j.at("id").get_to(v.id);
    j.at("text").get_to(v.text);
    v.source = j.value("source", std::string{});
    v.turn_count = j.value("turn_count", 1);
}

void to_json(json& j, const Requirement& v) {
    j = json{{"index", v.index},
             {"text", v.text},
             {"weight", json_number(v.weight, "weight")},
             {"kind", std::string(to_string(v.kind))},
             {"verifier_source", v.verifier_source ? json(*v.verifier_source) : json(nullptr)}};
}

void from_json(const json& j, Requirement& v) {
    j.at("index").get_to(v.index);
    j.at("text").get_to(v.text);
    j.at("weight").get_to(v.weight);
    v.kind = requirement_kind_from_string(j.at("kind").get<std::string>());
    const auto& src = j.value("verifier_source", json(nullptr));
    v.verifier_source = src.is_null() ? std::nullopt : std::optional(src.get<std::string>());
}

void to_json(json& j, const Checklist& v) {
    j = json{{"instruction_id", v.instruction_id},
             {"method", std::string(to_string(v.method))},
             {"requirements", v.requirements}};
}

void from_json(const json& j, Checklist& v) {
    j.at("instruction_id").get_to(v.instruction_id);
    v.method = checklist_method_from_string(j.at("method").get<std::string>());
    j.at("requirements").get_to(v.requirements);
}

void to_json(json& j, const SamplerParams& v) {
    j = json{{"temperature", json_number(v.temperature, "temperature")},
             {"top_p", json_number(v.top_p, "top_p")}};
}

void from_json(const json& j, SamplerParams& v) {
    j.at("temperature").get_to(v.temperature);
    j.at("top_p").get_to(v.top_p);
}

void to_json(json& j, const Response& v) {
    j = json{{"instruction_id", v.instruction_id},
             {"slot", std::string(to_string(v.slot))},
             {"text", v.text},
             {"sampler", v.sampler}};
}

void from_json(const json& j, Response& v) {
    j.at("instruction_id").get_to(v.instruction_id);
    v.slot = slot_from_string(j.at("slot").get<std::string>());
    j.at("text").get_to(v.text);
    j.at("sampler").get_to(v.sampler);
}

void to_json(json& j, const ScoreCell& v) {
    json samples = json::array();
    for (double s : v.judge_samples) samples.push_back(json_number(s, "judge_samples"));
    j = json{{"judge_samples", std::move(samples)},
             {"excluded_samples", v.excluded_samples},
             {"judge_mean", json_score(v.judge_mean, "judge_mean")},
             {"program_result", std::string(to_string(v.program_result))},
             {"combined", json_score(v.combined, "combined")},
             {"note", v.note}};
}

void from_json(const json& j, ScoreCell& v) {
    j.at("judge_samples").get_to(v.judge_samples);
    v.excluded_samples = j.value("excluded_samples", 0);
    v.judge_mean = score_from_json(j.at("judge_mean"));
    v.program_result = program_result_from_string(j.at("program_result").get<std::string>());
    v.combined = score_from_json(j.at("combined"));
    v.note = j.value("note", std::string{});
}

void to_json(json& j, const ScoreMatrix& v) {
    // std::map iteration gives (slot, index) order regardless of insertion order.
    json cells = json::array();
    for (const auto& [key, cell] : v.cells) {
        json c = cell;
        c["slot"] = std::string(to_string(key.first));
        c["requirement"] = key.second;
        cells.push_back(std::move(c));
    }
    json aggregate = json::object();
    for (const auto& [slot, score] : v.aggregate) {
        aggregate[std::string(to_string(slot))] = json_score(score, "aggregate");
    }
    j = json{{"instruction_id", v.instruction_id}, {"cells", std::move(cells)},
             {"aggregate", std::move(aggregate)}};
}

void from_json(const json& j, ScoreMatrix& v) {
    j.at("instruction_id").get_to(v.instruction_id);
    v.cells.clear();
    for (const auto& c : j.at("cells")) {
        CellKey key{slot_from_string(c.at("slot").get<std::string>()), c.at("requirement").get<int>()};
        v.cells[key] = c.get<ScoreCell>();
    }
    v.aggregate.clear();
    for (const auto& [slot, score] : j.at("aggregate").items()) {
        v.aggregate[slot_from_string(slot)] = score_from_json(score);
    }
}

void to_json(json& j, const PreferencePair& v) {
    j = json{{"instruction_id", v.instruction_id},
             {"chosen_slot", std::string(to_string(v.chosen_slot))},
             {"rejected_slot", std::string(to_string(v.rejected_slot))},
             {"chosen_score", json_number(v.chosen_score, "chosen_score")},
             {"rejected_score", json_number(v.rejected_score, "rejected_score")},
             {"max_criterion_diff", json_number(v.max_criterion_diff, "max_criterion_diff")},
             {"overall_diff", json_number(v.overall_diff, "overall_diff")},
             {"retained", v.retained}};
}

void from_json(const json& j, PreferencePair& v) {
    j.at("instruction_id").get_to(v.instruction_id);
    v.chosen_slot = slot_from_string(j.at("chosen_slot").get<std::string>());
    v.rejected_slot = slot_from_string(j.at("rejected_slot").get<std::string>());
    j.at("chosen_score").get_to(v.chosen_score);
    j.at("rejected_score").get_to(v.rejected_score);
    j.at("max_criterion_diff").get_to(v.max_criterion_diff);
    j.at("overall_diff").get_to(v.overall_diff);
    j.at("retained").get_to(v.retained);
}

}  // namespace checklist_forge
