#include "checklist_forge/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "checklist_forge/prompts.hpp"
#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
    std::string out = "invalid config:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
}

class FieldReader {
public:
    FieldReader(const json& j, std::vector<std::string>& errors) : j_(j), errors_(errors) {}

    template <class T>
    void read(const std::string& key, T& dst) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            dst = j_.at(key).get<T>();
        } catch (const json::exception&) {
            errors_.push_back(key + ": wrong type (got " + std::string(j_.at(key).type_name()) + ")");
        }
    }

    template <class E, class Parse>
    void read_enum(const std::string& key, E& dst, Parse parse) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            dst = parse(j_.at(key).get<std::string>());
        } catch (const std::exception& e) {
            errors_.push_back(key + ": " + e.what());
        }
    }

    void reject_unknown(const std::string& prefix = "") {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) errors_.push_back(prefix + k + ": unknown field");
        }
    }

    void mark(const std::string& key) { seen_.insert(key); }

private:
    const json& j_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> field_errors)
    : std::runtime_error(join_errors(field_errors)), field_errors_(std::move(field_errors)) {}

std::vector<std::string> validate_config(const PipelineConfig& c) {
    std::vector<std::string> e;
    auto positive = [&](const char* name, long long v) {
        if (v < 1) e.push_back(std::string(name) + ": must be a positive integer");
    };
    auto nonneg_finite = [&](const char* name, double v) {
        if (!std::isfinite(v) || v < 0.0) e.push_back(std::string(name) + ": must be >= 0");
    };
    auto unit_open = [&](const char* name, double v) {
        if (!std::isfinite(v) || v <= 0.0 || v > 1.0) {
            e.push_back(std::string(name) + ": must be in (0,1]");
        }
    };

    positive("judge_sample_count", c.judge_sample_count);
    nonneg_finite("judge_temperature", c.judge_temperature);
    positive("judge_max_tokens", c.judge_max_tokens);
    if (c.policy_model.empty()) e.push_back("policy_model: must be non-empty");
    nonneg_finite("response_temperature", c.response_temperature);
    unit_open("response_top_p", c.response_top_p);
    positive("response_max_tokens", c.response_max_tokens);
    unit_open("retention_fraction", c.retention_fraction);
    if (c.teacher_model.empty()) e.push_back("teacher_model: must be non-empty");
    if (c.checklist_method == ChecklistMethod::candidate_based && c.candidate_model_set.size() < 2) {
        e.push_back("candidate_model_set: candidate_based checklists need at least 2 models");
    }
    for (const auto& m : c.candidate_model_set) {
        if (m.empty()) e.push_back("candidate_model_set: model identifiers must be non-empty");
    }
    nonneg_finite("checklist_temperature", c.checklist_temperature);
    positive("checklist_max_tokens", c.checklist_max_tokens);
    positive("max_checklist_items", c.max_checklist_items);
    positive("candidate_truncate_chars", c.candidate_truncate_chars);
    nonneg_finite("candidate_temperature", c.candidate_temperature);
    unit_open("candidate_top_p", c.candidate_top_p);
    positive("candidate_max_tokens", c.candidate_max_tokens);
    nonneg_finite("verifier_temperature", c.verifier_temperature);
    positive("verifier_max_tokens", c.verifier_max_tokens);
    positive("sandbox_timeout_ms", c.sandbox_timeout_ms);
    positive("sandbox_memory_limit_mb", c.sandbox_memory_limit_mb);
    positive("concurrency", c.concurrency);
    if (c.output_dir.empty()) e.push_back("output_dir: must be non-empty");
    positive("ingest.max_turns", c.ingest.max_turns);
    return e;
}

json config_to_json(const PipelineConfig& c) {
    return json{
        {"judge_sample_count", c.judge_sample_count},
        {"judge_temperature", json_number(c.judge_temperature, "judge_temperature")},
        {"judge_max_tokens", c.judge_max_tokens},
        {"policy_model", c.policy_model},
        {"response_temperature", json_number(c.response_temperature, "response_temperature")},
        {"response_top_p", json_number(c.response_top_p, "response_top_p")},
        {"response_max_tokens", c.response_max_tokens},
        {"retention_fraction", json_number(c.retention_fraction, "retention_fraction")},
        {"filter_strategy", std::string(to_string(c.filter_strategy))},
        {"teacher_model", c.teacher_model},
        {"checklist_method", std::string(to_string(c.checklist_method))},
        {"candidate_model_set", c.candidate_model_set},
        {"checklist_temperature", json_number(c.checklist_temperature, "checklist_temperature")},
        {"checklist_max_tokens", c.checklist_max_tokens},
        {"max_checklist_items", c.max_checklist_items},
        {"candidate_truncate_chars", c.candidate_truncate_chars},
        {"candidate_temperature", json_number(c.candidate_temperature, "candidate_temperature")},
        {"candidate_top_p", json_number(c.candidate_top_p, "candidate_top_p")},
        {"candidate_max_tokens", c.candidate_max_tokens},
        {"verifier_temperature", json_number(c.verifier_temperature, "verifier_temperature")},
        {"verifier_max_tokens", c.verifier_max_tokens},
        {"sandbox_timeout_ms", c.sandbox_timeout_ms},
        {"sandbox_memory_limit_mb", c.sandbox_memory_limit_mb},
        {"sandbox_command", c.sandbox_command},
        {"concurrency", c.concurrency},
        {"seed", c.seed},
        {"endpoint_supports_n", c.endpoint_supports_n},
        {"corpus_path", c.corpus_path},
        {"output_dir", c.output_dir},
        {"ingest",
         {{"language", c.ingest.language ? json(*c.ingest.language) : json(nullptr)},
          {"max_turns", c.ingest.max_turns},
          {"drop_toxic", c.ingest.drop_toxic}}},
    };
}

PipelineConfig config_from_json(const json& j) {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError({"<root>: config must be a JSON object"});

    PipelineConfig c;
    FieldReader r(j, errors);
    r.read("judge_sample_count", c.judge_sample_count);
    r.read("judge_temperature", c.judge_temperature);
    r.read("judge_max_tokens", c.judge_max_tokens);
    r.read("policy_model", c.policy_model);
    r.read("response_temperature", c.response_temperature);
    r.read("response_top_p", c.response_top_p);
    r.read("response_max_tokens", c.response_max_tokens);
    r.read("retention_fraction", c.retention_fraction);
    r.read_enum("filter_strategy", c.filter_strategy, filter_strategy_from_string);
    r.read("teacher_model", c.teacher_model);
    r.read_enum("checklist_method", c.checklist_method, checklist_method_from_string);
    r.read("candidate_model_set", c.candidate_model_set);
    r.read("checklist_temperature", c.checklist_temperature);
    r.read("checklist_max_tokens", c.checklist_max_tokens);
    r.read("max_checklist_items", c.max_checklist_items);
    r.read("candidate_truncate_chars", c.candidate_truncate_chars);
    r.read("candidate_temperature", c.candidate_temperature);
    r.read("candidate_top_p", c.candidate_top_p);
    r.read("candidate_max_tokens", c.candidate_max_tokens);
    r.read("verifier_temperature", c.verifier_temperature);
    r.read("verifier_max_tokens", c.verifier_max_tokens);
    r.read("sandbox_timeout_ms", c.sandbox_timeout_ms);
    r.read("sandbox_memory_limit_mb", c.sandbox_memory_limit_mb);
    r.read("sandbox_command", c.sandbox_command);
    r.read("concurrency", c.concurrency);
    r.read("seed", c.seed);
    r.read("endpoint_supports_n", c.endpoint_supports_n);
    r.read("corpus_path", c.corpus_path);
    r.read("output_dir", c.output_dir);

    r.mark("ingest");
    if (j.contains("ingest")) {
        const auto& ing = j.at("ingest");
        if (!ing.is_object()) {
            errors.push_back("ingest: must be an object");
        } else {
            FieldReader ir(ing, errors);
            ir.mark("language");
            if (ing.contains("language")) {
                if (ing.at("language").is_null()) {
                    c.ingest.language.reset();
                } else if (ing.at("language").is_string()) {
                    c.ingest.language = ing.at("language").get<std::string>();
                } else {
                    errors.push_back("ingest.language: must be a string or null");
                }
            }
            ir.read("max_turns", c.ingest.max_turns);
            ir.read("drop_toxic", c.ingest.drop_toxic);
            ir.reject_unknown("ingest.");
        }
    }
    r.reject_unknown();

    for (auto& e : validate_config(c)) errors.push_back(std::move(e));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

std::filesystem::path LoadedConfig::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

LoadedConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"<file>: cannot read " + path.string()});
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("<file>: ") + e.what()});
    }
    LoadedConfig out;
    out.config = config_from_json(j);
    out.base_dir = std::filesystem::absolute(path).parent_path();
    return out;
}

std::string config_hash(const PipelineConfig& config) {
    std::string material = canonical_line(config_to_json(config));
    for (const auto& [name, hash] : prompt_hashes()) material += name + "=" + hash + "\n";
    return sha256_hex(material);
}

}  // namespace checklist_forge
