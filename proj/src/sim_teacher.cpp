#include "checklist_forge/sim_teacher.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "checklist_forge/text_util.hpp"
#include "checklist_forge/verifier_gen.hpp"

namespace checklist_forge {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash64(std::string_view s) { return std::stoull(sha256_hex(s).substr(0, 16), nullptr, 16); }

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() { return splitmix64(state_); }
    int uniform(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
    bool chance(int one_in) { return next() % static_cast<std::uint64_t>(one_in) == 0; }

private:
    std::uint64_t state_;
};

std::string between(std::string_view text, std::string_view open, std::string_view close) {
    auto b = text.rfind(open);
    if (b == std::string_view::npos) return {};
    b += open.size();
    auto e = text.find(close, b);
    return std::string(text.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
}

std::vector<std::string> keywords(std::string_view text, std::size_t limit) {
    static const std::set<std::string> kStop = {"that", "this", "with", "from", "have", "what", "your",
                                                "about", "which", "would", "could", "should", "their",
                                                "there", "write", "please", "into", "make", "give"};
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.size() >= 4 && !kStop.count(word) &&
            std::find(out.begin(), out.end(), word) == out.end()) {
            out.push_back(word);
        }
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else flush();
        if (out.size() >= limit) break;
    }
    flush();
    if (out.size() > limit) out.resize(limit);
    return out;
}

std::string sim_checklist(const std::string& instruction, bool candidate_based, Rng& rng) {
    auto words = keywords(instruction, 3);
    std::vector<std::pair<std::string, int>> items;
    items.emplace_back("Does the response directly carry out the instruction instead of describing how it would?", 100);
    for (std::size_t i = 0; i < words.size(); ++i) {
        static const int kWeights[] = {90, 80, 75, 60};
        const int w = kWeights[rng.uniform(0, 3)];
        if (i == 0) {
            items.emplace_back("Does the generated text contain the word \"" + words[i] + "\"?", w);
        } else {
            items.emplace_back("Does the response address the aspect \"" + words[i] + "\" explicitly?", w);
        }
    }
    if (candidate_based) items.emplace_back("Is the response free of factual errors?", 85);
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += std::to_string(i + 1) + ". " + items[i].first;
        // Occasionally leave the weight off to mimic formatting drift.
        if (i + 1 == items.size() && rng.chance(5)) {
            out += "\n";
            continue;
        }
        out += " (weight: " + std::to_string(items[i].second) + "/100)\n";
    }
    return out;
}

std::string sim_verifier(const std::string& requirement) {
    static const std::regex kWord(R"re(contain the word "([a-z0-9]+)")re");
    std::smatch m;
    if (std::regex_search(requirement, m, kWord)) {
        return "```python\ndef verify_requirement(text):\n    return \"" + m[1].str() +
               "\" in text.lower()\n```";
    }
    return std::string(kDeferralMarker);
}

std::string sim_judge(const std::string& response, const std::string& requirement, int base_offset, Rng& rng) {
    static const std::regex kQuoted(R"re("([a-z0-9]+)")re");
    std::smatch m;
    int base = 40 + base_offset;
    if (std::regex_search(requirement, m, kQuoted)) {
        base = contains_ci(response, m[1].str()) ? 85 : 20;
    }
    if (rng.chance(25)) return "-1";
    const int score = std::clamp(base + rng.uniform(-10, 10), 0, 100);
    if (rng.chance(30)) return "Score: " + std::to_string(score);
    return std::to_string(score);
}

std::string sim_response(const std::string& prompt, const std::string& model, Rng& rng) {
    auto words = keywords(prompt, 6);
    std::string out = "Response from " + model + ".";
    for (const auto& w : words) {
        if (rng.chance(2)) out += " This covers " + w + ".";
    }
    if (rng.chance(3)) out += " Let me know if you need anything else.";
    return out;
}

}  // namespace

std::vector<std::string> SimulatedTeacher::complete(const TeacherRequest& request) {
    if (request.messages.empty()) throw EndpointFailure("simulated teacher: no messages");
    const std::string& first = request.messages.front().content;
    const std::string& last = request.messages.back().content;
    const std::uint64_t base = hash64(canonical_request(request)) ^ seed_;

    std::vector<std::string> out;
    for (int i = 0; i < request.n; ++i) {
        Rng rng(base + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL);
        if (first.find("\nGenerated Text:\n") != std::string::npos) {
            const std::string response = between(first, "\nGenerated Text:\n", "\n\nQuestion:");
            const std::string requirement = between(first, "\nQuestion:\n", "\n\nScore:");
            const int offset = static_cast<int>(hash64(response + requirement) % 41);
            out.push_back(sim_judge(response, requirement, offset, rng));
        } else if (first.find("Verification Function:") != std::string::npos) {
            out.push_back(request.messages.size() > 1 ? std::string(kDeferralMarker)
                                                      : sim_verifier(between(first, "\nRequirement:\n", "\n\nVerification Function:")));
        } else if (first.find("\nChecklist:") != std::string::npos && first.find("Metric:") == std::string::npos &&
                   first.find("Better checklist:") == std::string::npos) {
            const bool candidate_based = first.find("Candidate responses:") != std::string::npos;
            const std::string instruction = between(
                first, "\nInstruction:\n", candidate_based ? "\n\nCandidate responses:" : "\n\nChecklist:");
            out.push_back(sim_checklist(instruction, candidate_based, rng));
        } else if (first.find("Metric:") != std::string::npos) {
            out.push_back(std::to_string(rng.uniform(55, 98)));
        } else if (first.find("Better checklist:") != std::string::npos) {
            static const char* kAnswers[] = {"A", "B", "TIE"};
            out.push_back(kAnswers[hash64(first) % 3]);
        } else {
            out.push_back(sim_response(last, request.model, rng));
        }
    }
    return out;
}

}  // namespace checklist_forge
