#include "checklist_forge/checklist_gen.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include "checklist_forge/prompts.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

namespace {

std::string strip_bold(std::string s) {
    for (auto pos = s.find("**"); pos != std::string::npos; pos = s.find("**")) s.erase(pos, 2);
    return s;
}

std::string fmt_weight(double w) {
    std::ostringstream os;
    os << w;
    return os.str();
}

void require_text(const Instruction& instruction) {
    if (trim(instruction.text).empty()) {
        throw std::invalid_argument("instruction '" + instruction.id + "' has empty text");
    }
}

}  // namespace

ParsedChecklist parse_checklist_completion(std::string_view completion, int max_items) {
    static const std::regex kItem(R"(^\s*(?:\d+\s*[.):]|[-*]|•)\s*(.+?)\s*$)");
    static const std::regex kWeight(
        R"(\s*[\(\[]?\s*weight\s*[:=]?\s*(-?\d+(?:\.\d+)?)\s*(?:/\s*100)?\s*[\)\]]?\s*\.?\s*$)",
        std::regex::icase);

    ParsedChecklist out;
    std::istringstream lines{std::string(completion)};
    std::string line;
    int item_no = 0;
    while (std::getline(lines, line)) {
        std::smatch m;
        std::string cleaned = strip_bold(line);
        if (!std::regex_match(cleaned, m, kItem)) continue;
        ++item_no;
        std::string body = m[1].str();

        double weight = kDefaultItemWeight;
        std::smatch wm;
        if (std::regex_search(body, wm, kWeight)) {
            weight = std::stod(wm[1].str());
            body = trim(body.substr(0, static_cast<std::size_t>(wm.position(0))));
            if (weight > 100.0) {
                out.warnings.push_back("item " + std::to_string(item_no) + ": weight " +
                                       fmt_weight(weight) + " clamped to 100");
                weight = 100.0;
            } else if (weight < 0.0) {
                out.warnings.push_back("item " + std::to_string(item_no) + ": weight " +
                                       fmt_weight(weight) + " clamped to 0");
                weight = 0.0;
            }
        } else {
            out.warnings.push_back("item " + std::to_string(item_no) +
                                   ": missing weight, defaulted to 75");
        }
        body = trim(body);
        if (body.empty()) {
            out.warnings.push_back("item " + std::to_string(item_no) + ": empty text dropped");
            continue;
        }
        out.items.push_back(ParsedItem{std::move(body), weight});
    }

    if (max_items > 0 && static_cast<int>(out.items.size()) > max_items) {
        out.warnings.push_back("dropped " + std::to_string(out.items.size() - max_items) +
                               " items beyond the cap of " + std::to_string(max_items));
        out.items.resize(static_cast<std::size_t>(max_items));
    }
    return out;
}

ChecklistGenerator::ChecklistGenerator(Gateway& gateway, const PipelineConfig& config)
    : gateway_(gateway), config_(config) {}

TeacherRequest ChecklistGenerator::direct_request(const Instruction& instruction) const {
    TeacherRequest req;
    req.model = config_.teacher_model;
    req.messages = {{"user", render_template(prompt("checklist_direct").text,
                                             {{"instruction", instruction.text}})}};
    req.temperature = config_.checklist_temperature;
    req.top_p = 1.0;
    req.n = 1;
    req.max_tokens = config_.checklist_max_tokens;
    req.seed = config_.seed;
    return req;
}

TeacherRequest ChecklistGenerator::candidate_request(const Instruction& instruction,
                                                     const std::string& model) const {
    TeacherRequest req;
    req.model = model;
    req.messages = {{"user", instruction.text}};
    req.temperature = config_.candidate_temperature;
    req.top_p = config_.candidate_top_p;
    req.n = 1;
    req.max_tokens = config_.candidate_max_tokens;
    req.seed = config_.seed;
    return req;
}

TeacherRequest ChecklistGenerator::candidate_based_request(const Instruction& instruction,
                                                           const CandidateSet& candidates) const {
    std::string block;
    for (std::size_t i = 0; i < candidates.candidates.size(); ++i) {
        if (i > 0) block += "\n\n";
        block += "Response " + std::to_string(i + 1) + ":\n";
        block += truncate_utf8(candidates.candidates[i].text,
                               static_cast<std::size_t>(config_.candidate_truncate_chars));
    }
    TeacherRequest req;
    req.model = config_.teacher_model;
    req.messages = {{"user", render_template(prompt("checklist_candidate").text,
                                             {{"instruction", instruction.text},
                                              {"candidates", block}})}};
    req.temperature = config_.checklist_temperature;
    req.top_p = 1.0;
    req.n = 1;
    req.max_tokens = config_.checklist_max_tokens;
    req.seed = config_.seed;
    return req;
}

Outcome<Checklist> ChecklistGenerator::run_checklist_request(const Instruction& instruction,
                                                             const TeacherRequest& request,
                                                             ChecklistMethod method) {
    std::vector<std::string> warnings;
    TeacherRequest current = request;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string completion;
        try {
            completion = gateway_.complete(current).front();
        } catch (const EndpointFailure& e) {
            return Outcome<Checklist>::failed(std::string("teacher failure: ") + e.what(),
                                              std::move(warnings));
        }
        auto parsed = parse_checklist_completion(completion, config_.max_checklist_items);
        if (parsed.items.empty()) {
            if (attempt == 0) {
                warnings.push_back("unparseable checklist completion, reprompting");
                current.messages.push_back({"assistant", completion});
                current.messages.push_back({"user", std::string(prompt("checklist_reprompt").text)});
            }
            continue;
        }
        for (auto& w : parsed.warnings) warnings.push_back(std::move(w));

        Checklist checklist;
        checklist.instruction_id = instruction.id;
        checklist.method = method;
        for (auto& item : parsed.items) {
            Requirement r;
            r.index = static_cast<int>(checklist.requirements.size());
            r.text = std::move(item.text);
            r.weight = item.weight;
            r.kind = RequirementKind::generated;
            checklist.requirements.push_back(std::move(r));
        }
        checklist = inject_universal(std::move(checklist));
        auto report = validate_checklist(checklist);
        for (auto& w : report.warnings) warnings.push_back(std::move(w));
        if (!report.ok()) {
            std::string reason = "generated checklist invalid:";
            for (const auto& e : report.errors) reason += " " + e + ";";
            return Outcome<Checklist>::failed(std::move(reason), std::move(warnings));
        }
        Outcome<Checklist> out;
        out.value = std::move(checklist);
        out.warnings = std::move(warnings);
        return out;
    }
    return Outcome<Checklist>::failed("checklist completion unparseable after reprompt",
                                      std::move(warnings));
}

Outcome<Checklist> ChecklistGenerator::generate_direct(const Instruction& instruction) {
    require_text(instruction);
    return run_checklist_request(instruction, direct_request(instruction), ChecklistMethod::direct);
}

Outcome<CandidateSet> ChecklistGenerator::generate_candidates(const Instruction& instruction) {
    require_text(instruction);
    if (config_.candidate_model_set.empty()) {
        throw std::invalid_argument("candidate_model_set is empty");
    }
    Outcome<CandidateSet> out;
    CandidateSet set;
    set.instruction_id = instruction.id;
    for (const auto& model : config_.candidate_model_set) {
        try {
            set.candidates.push_back({model, gateway_.complete(candidate_request(instruction, model)).front()});
        } catch (const EndpointFailure& e) {
            out.warnings.push_back("candidate model " + model + " failed: " + e.what());
        }
    }
    if (set.candidates.size() < 2) {
        out.failure = "only " + std::to_string(set.candidates.size()) +
                      " candidate responses succeeded (need at least 2)";
        return out;
    }
    out.value = std::move(set);
    return out;
}

Outcome<Checklist> ChecklistGenerator::generate_candidate_based(const Instruction& instruction,
                                                                const CandidateSet& candidates) {
    require_text(instruction);
    if (candidates.candidates.size() < 2) {
        throw std::invalid_argument("candidate set for '" + instruction.id +
                                    "' needs at least 2 candidates");
    }
    return run_checklist_request(instruction, candidate_based_request(instruction, candidates),
                                 ChecklistMethod::candidate_based);
}

Outcome<Checklist> ChecklistGenerator::generate(const Instruction& instruction,
                                                ChecklistMethod method) {
    if (method == ChecklistMethod::direct) return generate_direct(instruction);
    auto candidates = generate_candidates(instruction);
    if (!candidates.ok()) return Outcome<Checklist>::failed(candidates.failure, candidates.warnings);
    auto out = generate_candidate_based(instruction, *candidates.value);
    out.warnings.insert(out.warnings.begin(), candidates.warnings.begin(), candidates.warnings.end());
    return out;
}

}  // namespace checklist_forge
