#include "checklist_forge/checklist_eval.hpp"

#include <cstdio>
#include <sstream>

#include "checklist_forge/prompts.hpp"
#include "checklist_forge/scoring.hpp"
#include "checklist_forge/serialize.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

std::string_view to_string(QualityMetric metric) {
    switch (metric) {
        case QualityMetric::naturalness: return "naturalness";
        case QualityMetric::objectiveness: return "objectiveness";
        case QualityMetric::comprehensiveness: return "comprehensiveness";
        case QualityMetric::atomicity: return "atomicity";
    }
    return "naturalness";
}

std::string_view to_string(Preference p) {
    switch (p) {
        case Preference::prefer_a: return "prefer_a";
        case Preference::prefer_b: return "prefer_b";
        case Preference::tie: return "tie";
    }
    return "tie";
}

std::string render_checklist(const Checklist& checklist) {
    std::ostringstream os;
    for (const auto& r : checklist.requirements) {
        os << (r.index + 1) << ". " << r.text << " (weight: " << r.weight << "/100)\n";
    }
    return os.str();
}

std::optional<Preference> parse_comparison_completion(std::string_view completion) {
    std::string t = trim(completion);
    // Take the first word, ignoring trailing punctuation and markdown.
    std::size_t b = 0;
    while (b < t.size() && (t[b] == '*' || t[b] == '"' || t[b] == '\'')) ++b;
    std::size_t e = b;
    while (e < t.size() && std::isalpha(static_cast<unsigned char>(t[e]))) ++e;
    const std::string word = to_lower_ascii(std::string_view(t).substr(b, e - b));
    if (word == "a") return Preference::prefer_a;
    if (word == "b") return Preference::prefer_b;
    if (word == "tie") return Preference::tie;
    return std::nullopt;
}

ChecklistEvaluator::ChecklistEvaluator(Gateway& gateway, const PipelineConfig& config)
    : gateway_(gateway), config_(config) {}

TeacherRequest ChecklistEvaluator::quality_request(QualityMetric metric, const Instruction& instruction,
                                                   const Checklist& checklist) const {
    TeacherRequest req;
    req.model = config_.teacher_model;
    const std::string name = "eval_" + std::string(to_string(metric));
    req.messages = {{"user", render_template(prompt(name).text, {{"instruction", instruction.text},
                                                                 {"checklist", render_checklist(checklist)}})}};
    req.temperature = config_.judge_temperature;
    req.top_p = 1.0;
    req.n = config_.judge_sample_count;
    req.max_tokens = config_.judge_max_tokens;
    req.seed = config_.seed;
    return req;
}

TeacherRequest ChecklistEvaluator::compare_request(const Instruction& instruction, const Checklist& first,
                                                   const Checklist& second) const {
    TeacherRequest req;
    req.model = config_.teacher_model;
    req.messages = {{"user", render_template(prompt("eval_compare").text,
                                             {{"instruction", instruction.text},
                                              {"checklist_a", render_checklist(first)},
                                              {"checklist_b", render_checklist(second)}})}};
    req.temperature = config_.judge_temperature;
    req.top_p = 1.0;
    req.n = 1;
    req.max_tokens = config_.judge_max_tokens;
    req.seed = config_.seed;
    return req;
}

QualityScores ChecklistEvaluator::score_checklist_quality(const Instruction& instruction,
                                                          const Checklist& checklist) {
    auto report = validate_checklist(checklist);
    if (!report.ok()) {
        throw std::invalid_argument("checklist for '" + checklist.instruction_id +
                                    "' failed validation: " + report.errors.front());
    }
    QualityScores out;
    for (std::size_t i = 0; i < kQualityMetrics.size(); ++i) {
        const auto metric = kQualityMetrics[i];
        try {
            auto cell = judge_cell_from_completions(gateway_.complete(quality_request(metric, instruction, checklist)));
            out.scores[i] = cell.judge_mean;
            if (!cell.judge_mean) out.notes.push_back(std::string(to_string(metric)) + ": " + cell.note);
        } catch (const EndpointFailure& e) {
            out.scores[i] = kMissing;
            out.notes.push_back(std::string(to_string(metric)) + ": " + e.what());
        }
    }
    return out;
}

std::optional<Preference> ChecklistEvaluator::ask(const TeacherRequest& request, std::string& note) {
    try {
        auto completion = gateway_.complete(request).front();
        auto parsed = parse_comparison_completion(completion);
        if (!parsed) note += (note.empty() ? "" : "; ") + std::string("unparseable comparison answer");
        return parsed;
    } catch (const EndpointFailure& e) {
        note += (note.empty() ? "" : "; ") + std::string(e.what());
        return std::nullopt;
    }
}

Comparison ChecklistEvaluator::compare_checklists(const Instruction& instruction, const Checklist& a,
                                                  const Checklist& b) {
    if (a.instruction_id != b.instruction_id) {
        throw std::invalid_argument("compare_checklists: checklists target different instructions");
    }
    Comparison c;
    auto first = ask(compare_request(instruction, a, b), c.note);
    auto second = ask(compare_request(instruction, b, a), c.note);
    c.original_order = first.value_or(Preference::tie);
    // In the swapped presentation "A" is checklist b.
    const Preference swapped = second.value_or(Preference::tie);
    c.swapped_order = swapped == Preference::prefer_a   ? Preference::prefer_b
                      : swapped == Preference::prefer_b ? Preference::prefer_a
                                                        : Preference::tie;
    c.outcome = c.original_order == c.swapped_order ? c.original_order : Preference::tie;
    return c;
}

namespace {

json quality_json(const QualityScores& q) {
    json j = json::object();
    for (std::size_t i = 0; i < kQualityMetrics.size(); ++i) {
        j[std::string(to_string(kQualityMetrics[i]))] = json_score(q.scores[i], "quality");
    }
    if (!q.notes.empty()) j["notes"] = q.notes;
    return j;
}

MaybeScore mean_of(const std::vector<double>& v) {
    if (v.empty()) return kMissing;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

json checklist_eval_report(const std::vector<ChecklistEvalRow>& rows) {
    json per_row = json::array();
    std::array<std::vector<double>, 4> direct_vals, cand_vals;
    std::size_t prefer_direct = 0, prefer_cand = 0, ties = 0;
    for (const auto& r : rows) {
        per_row.push_back(json{{"instruction_id", r.instruction_id},
                               {"direct", quality_json(r.direct)},
                               {"candidate_based", quality_json(r.candidate_based)},
                               {"preference",
                                {{"outcome", std::string(to_string(r.comparison.outcome))},
                                 {"original_order", std::string(to_string(r.comparison.original_order))},
                                 {"swapped_order", std::string(to_string(r.comparison.swapped_order))},
                                 {"note", r.comparison.note}}}});
        for (std::size_t i = 0; i < 4; ++i) {
            if (r.direct.scores[i]) direct_vals[i].push_back(*r.direct.scores[i]);
            if (r.candidate_based.scores[i]) cand_vals[i].push_back(*r.candidate_based.scores[i]);
        }
        switch (r.comparison.outcome) {
            case Preference::prefer_a: ++prefer_direct; break;
            case Preference::prefer_b: ++prefer_cand; break;
            case Preference::tie: ++ties; break;
        }
    }

    json means = json::object();
    for (std::size_t i = 0; i < 4; ++i) {
        means[std::string(to_string(kQualityMetrics[i]))] =
            json{{"direct", json_score(mean_of(direct_vals[i]), "mean")},
                 {"candidate_based", json_score(mean_of(cand_vals[i]), "mean")}};
    }
    const double n = static_cast<double>(rows.size());
    means["preferred_overall_pct"] =
        json{{"direct", rows.empty() ? json(nullptr) : json_number(100.0 * prefer_direct / n, "pct")},
             {"candidate_based", rows.empty() ? json(nullptr) : json_number(100.0 * prefer_cand / n, "pct")}};

    return json{{"instructions", rows.size()},
                {"ties", ties},
                {"means", std::move(means)},
                {"rows", std::move(per_row)}};
}

std::string format_eval_table(const json& report) {
    auto cell = [](const json& v) {
        if (v.is_null()) return std::string("   n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%6.1f", v.get<double>());
        return std::string(buf);
    };
    std::ostringstream os;
    os << "Metric                  Direct  Candidate-Based\n";
    const auto& means = report.at("means");
    const std::pair<const char*, const char*> rows[] = {
        {"Naturalness", "naturalness"},
        {"Objectiveness", "objectiveness"},
        {"Comprehensiveness", "comprehensiveness"},
        {"Atomicity", "atomicity"},
        {"% Preferred Overall", "preferred_overall_pct"}};
    for (const auto& [label, key] : rows) {
        char line[128];
        std::snprintf(line, sizeof line, "%-22s  %s  %s\n", label, cell(means.at(key).at("direct")).c_str(),
                      cell(means.at(key).at("candidate_based")).c_str());
        os << line;
    }
    return os.str();
}

}  // namespace checklist_forge
