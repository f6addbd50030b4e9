#include "checklist_forge/scoring.hpp"

#include <cmath>
#include <regex>
#include <stdexcept>

#include "checklist_forge/prompts.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

std::optional<double> parse_judge_completion(std::string_view completion) {
    static const std::regex kNumeral(R"(-?(?:\d+(?:\.\d+)?|\.\d+))");
    std::cmatch m;
    if (!std::regex_search(completion.data(), completion.data() + completion.size(), m, kNumeral)) {
        return std::nullopt;
    }
    const double value = std::strtod(m[0].str().c_str(), nullptr);
    if (value == kConfusedSentinel) return kConfusedSentinel;
    if (value >= 0.0 && value <= 100.0) return value == 0.0 ? 0.0 : value;
    return std::nullopt;
}

ScoreCell judge_cell_from_completions(const std::vector<std::string>& completions) {
    ScoreCell cell;
    double sum = 0.0;
    for (const auto& c : completions) {
        auto v = parse_judge_completion(c);
        if (v && *v != kConfusedSentinel) {
            cell.judge_samples.push_back(*v);
            sum += *v;
        } else {
            ++cell.excluded_samples;
        }
    }
    if (cell.judge_samples.empty()) {
        cell.judge_mean = kMissing;
        cell.note = "no valid judge samples";
    } else {
        cell.judge_mean = sum / static_cast<double>(cell.judge_samples.size());
    }
    return cell;
}

ScoreCell fuse(ScoreCell cell, ProgramResult program) {
    cell.program_result = program;
    if (!cell.judge_mean) {
        cell.combined = kMissing;
        return cell;
    }
    switch (program) {
        case ProgramResult::pass: cell.combined = (*cell.judge_mean + 100.0) / 2.0; break;
        case ProgramResult::fail: cell.combined = (*cell.judge_mean + 0.0) / 2.0; break;
        case ProgramResult::error:
        case ProgramResult::absent: cell.combined = cell.judge_mean; break;
    }
    return cell;
}

ScoreCell fuse(ScoreCell cell, const std::optional<SandboxVerdict>& verdict) {
    auto fused = fuse(std::move(cell), to_program_result(verdict));
    if (verdict && (verdict->status == VerdictStatus::error || verdict->status == VerdictStatus::timeout)) {
        std::string detail = "program " + std::string(to_string(verdict->status));
        if (verdict->detail) detail += ": " + *verdict->detail;
        fused.note = fused.note.empty() ? detail : fused.note + "; " + detail;
    }
    return fused;
}

MaybeScore weighted_mean(std::span<const double> weights, std::span<const MaybeScore> scores) {
    if (weights.size() != scores.size()) {
        throw std::invalid_argument("weighted_mean: " + std::to_string(weights.size()) + " weights vs " +
                                    std::to_string(scores.size()) + " scores");
    }
    // Neumaier-compensated sums.
    double num = 0.0, num_c = 0.0, den = 0.0, den_c = 0.0;
    auto add = [](double& sum, double& comp, double x) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    };
    bool any = false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!scores[i]) continue;
        any = true;
        add(num, num_c, weights[i] * *scores[i]);
        add(den, den_c, weights[i]);
    }
    const double total_weight = den + den_c;
    if (!any || total_weight == 0.0) return kMissing;
    return (num + num_c) / total_weight;
}

MaybeScore aggregate(const Checklist& checklist, std::span<const ScoreCell> cells) {
    if (cells.size() != checklist.requirements.size()) {
        throw std::invalid_argument("aggregate: cells must cover every requirement of '" +
                                    checklist.instruction_id + "'");
    }
    std::vector<double> weights;
    std::vector<MaybeScore> scores;
    weights.reserve(cells.size());
    scores.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        weights.push_back(checklist.requirements[i].weight);
        scores.push_back(cells[i].combined);
    }
    return weighted_mean(weights, scores);
}

ScoreMatrix assemble_matrix(const Checklist& checklist, std::vector<ScoreCell> cells_a,
                            std::vector<ScoreCell> cells_b) {
    ScoreMatrix m;
    m.instruction_id = checklist.instruction_id;
    m.aggregate[Slot::A] = aggregate(checklist, cells_a);
    m.aggregate[Slot::B] = aggregate(checklist, cells_b);
    for (std::size_t i = 0; i < cells_a.size(); ++i) {
        m.cells[{Slot::A, static_cast<int>(i)}] = std::move(cells_a[i]);
        m.cells[{Slot::B, static_cast<int>(i)}] = std::move(cells_b[i]);
    }
    return m;
}

Scorer::Scorer(Gateway& gateway, const PipelineConfig& config) : gateway_(gateway), config_(config) {}

TeacherRequest Scorer::judge_request(const Instruction& instruction, const Response& response,
                                     const Requirement& requirement, int n) const {
    TeacherRequest req;
    req.model = config_.teacher_model;
    req.messages = {{"user", render_template(prompt("judge").text,
                                             {{"instruction", instruction.text},
                                              {"response", response.text},
                                              {"requirement", requirement.text}})}};
    req.temperature = config_.judge_temperature;
    req.top_p = 1.0;
    req.n = n;
    req.max_tokens = config_.judge_max_tokens;
    req.seed = config_.seed;
    return req;
}

ScoreCell Scorer::judge_item(const Instruction& instruction, const Response& response,
                             const Requirement& requirement, int n) {
    if (n < 1) throw std::invalid_argument("judge_item: n must be >= 1");
    try {
        return judge_cell_from_completions(gateway_.complete(judge_request(instruction, response, requirement, n)));
    } catch (const EndpointFailure& e) {
        ScoreCell cell;
        cell.judge_mean = kMissing;
        cell.note = std::string("judge request failed: ") + e.what();
        return cell;
    }
}

}  // namespace checklist_forge
