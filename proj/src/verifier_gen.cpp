#include "checklist_forge/verifier_gen.hpp"

#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "checklist_forge/prompts.hpp"
#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

namespace {

constexpr std::string_view kFence = "```";

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

bool is_bare_none(std::string_view completion) {
    std::string t = trim(completion);
    if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
        t = trim(std::string_view(t).substr(1, t.size() - 2));
    }
    return t == "NONE";
}

// Replaces the contents of string literals with nothing and drops comments,
// keeping line structure, so token scans only see code.
std::string strip_strings_and_comments(std::string_view src) {
    std::string out;
    out.reserve(src.size());
    std::size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '"' || c == '\'') {
            const bool triple = src.substr(i, 3) == std::string(3, c);
            const std::size_t qlen = triple ? 3 : 1;
            // String prefix letters (r, b, u, f) sit directly before the quote.
            std::string prefix;
            for (std::size_t k = out.size(); k > 0 && prefix.size() < 2; --k) {
                char p = static_cast<char>(std::tolower(static_cast<unsigned char>(out[k - 1])));
                if (p != 'r' && p != 'b' && p != 'u' && p != 'f') break;
                prefix.push_back(p);
            }
            const bool raw = prefix.find('r') != std::string::npos;
            // f-string bodies hold live expressions; keep them visible.
            const bool keep = prefix.find('f') != std::string::npos;
            out.append("\"");
            i += qlen;
            while (i < src.size()) {
                if (!raw && src[i] == '\\') {
                    if (keep) out.append(src.substr(i, 2));
                    i += 2;
                    continue;
                }
                if (triple ? src.substr(i, 3) == std::string(3, c) : src[i] == c) {
                    i += qlen;
                    break;
                }
                if (!triple && src[i] == '\n') break;  // unterminated; stop at line end
                if (keep || src[i] == '\n') out.push_back(src[i]);
                ++i;
            }
            out.append("\"");
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

const std::set<std::string>& allowed_modules() {
    static const std::set<std::string> kAllowed = {
        "re",         "string",   "math",    "unicodedata", "collections", "itertools",
        "functools",  "statistics", "textwrap", "json",     "difflib",     "operator",
        "typing",     "decimal",  "fractions", "datetime",  "calendar",
    };
    return kAllowed;
}

const std::vector<std::pair<std::regex, std::string>>& forbidden_patterns() {
    static const std::vector<std::pair<std::regex, std::string>> kForbidden = [] {
        std::vector<std::pair<std::regex, std::string>> v;
        const char* calls[] = {"open", "exec", "eval", "compile", "globals", "locals", "vars",
                               "getattr", "setattr", "delattr", "input", "breakpoint", "exit",
                               "quit", "help", "memoryview"};
        for (const char* name : calls) {
            v.emplace_back(std::regex(std::string(R"(\b)") + name + R"(\s*\()"),
                           std::string(name) + "()");
        }
        const char* names[] = {"__import__", "__builtins__", "__subclasses__", "__globals__",
                               "__code__", "__class__", "__bases__", "__mro__", "__dict__",
                               "__loader__", "__spec__"};
        for (const char* name : names) v.emplace_back(std::regex(name), name);
        const char* modules[] = {"os", "sys", "subprocess", "socket", "importlib", "ctypes",
                                 "pathlib", "shutil", "urllib", "http", "multiprocessing",
                                 "threading", "signal", "pickle", "marshal", "asyncio", "select",
                                 "tempfile", "glob", "builtins", "resource", "pty", "fcntl"};
        for (const char* name : modules) {
            v.emplace_back(std::regex(std::string(R"(\b)") + name + R"(\b)"), name);
        }
        return v;
    }();
    return kForbidden;
}

std::string top_module(std::string name) {
    name = trim(name);
    auto as = name.find(" as ");
    if (as != std::string::npos) name = trim(name.substr(0, as));
    auto dot = name.find('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

VerifierParse parse_verifier_completion(std::string_view completion) {
    const std::size_t fences = count_occurrences(completion, kFence);
    const bool has_marker = contains_ci(completion, kDeferralMarker);

    if (fences == 0) {
        if (has_marker || is_bare_none(completion)) return {VerifierParseKind::defer, {}};
        return {VerifierParseKind::malformed, {}};
    }
    if (fences != 2 || has_marker) return {VerifierParseKind::malformed, {}};

    const std::size_t open = completion.find(kFence) + kFence.size();
    const std::size_t close = completion.find(kFence, open);
    std::string_view body = completion.substr(open, close - open);
    // Opening fence line may carry a language tag ("python", "py").
    auto nl = body.find('\n');
    if (nl != std::string_view::npos) {
        std::string tag = trim(body.substr(0, nl));
        static const std::regex kTag(R"([A-Za-z0-9_+-]*)");
        if (std::regex_match(tag, kTag)) body = body.substr(nl + 1);
    }
    std::string source(body);
    while (!source.empty() && std::isspace(static_cast<unsigned char>(source.back()))) source.pop_back();
    if (trim(source).empty()) return {VerifierParseKind::malformed, {}};
    return {VerifierParseKind::code, source + "\n"};
}

std::string verifier_entry_point(std::string_view source) {
    static const std::regex kDef(R"(^def\s+([A-Za-z_]\w*)\s*\(([^)]*)\)\s*(?:->[^:]*)?:)");
    const std::string code = strip_strings_and_comments(source);
    std::istringstream lines(code);
    std::string line;
    std::vector<std::pair<std::string, std::string>> defs;
    while (std::getline(lines, line)) {
        std::smatch m;
        if (std::regex_search(line, m, kDef)) defs.emplace_back(m[1].str(), m[2].str());
        else if (line.rfind("def ", 0) == 0 || line.rfind("async def", 0) == 0) return {};
    }
    if (defs.size() != 1) return {};
    // Exactly one plain parameter (annotations and defaults allowed).
    std::string params = trim(defs[0].second);
    if (!params.empty() && params.back() == ',') params.pop_back();
    if (trim(params).empty() || params.find(',') != std::string::npos ||
        params.find('*') != std::string::npos) {
        return {};
    }
    return defs[0].first;
}

ScreenResult screen_verifier_source(std::string_view source) {
    ScreenResult r;
    if (source.size() > kMaxVerifierSourceChars) {
        r.reason = "source exceeds " + std::to_string(kMaxVerifierSourceChars) + " characters";
        return r;
    }
    const std::string code = strip_strings_and_comments(source);

    static const std::regex kImport(R"(^\s*import\s+(.+)$)");
    static const std::regex kFromImport(R"(^\s*from\s+(\S+)\s+import\b)");
    std::istringstream lines(code);
    std::string line;
    while (std::getline(lines, line)) {
        std::smatch m;
        std::vector<std::string> modules;
        if (std::regex_search(line, m, kFromImport)) {
            if (m[1].str().front() == '.') {
                r.reason = "relative import not allowed";
                return r;
            }
            modules.push_back(top_module(m[1].str()));
        } else if (std::regex_search(line, m, kImport)) {
            std::stringstream names(m[1].str());
            std::string name;
            while (std::getline(names, name, ',')) modules.push_back(top_module(name));
        }
        for (const auto& mod : modules) {
            if (!allowed_modules().count(mod)) {
                r.reason = "import of non-allowlisted module '" + mod + "'";
                return r;
            }
        }
    }

    for (const auto& [pattern, label] : forbidden_patterns()) {
        if (std::regex_search(code, pattern)) {
            r.reason = "forbidden primitive '" + label + "'";
            return r;
        }
    }

    r.entry_point = verifier_entry_point(source);
    if (r.entry_point.empty()) {
        r.reason = "source must define exactly one top-level function taking one argument";
        return r;
    }
    r.accepted = true;
    return r;
}

VerifierGenerator::VerifierGenerator(Gateway& gateway, const PipelineConfig& config)
    : gateway_(gateway), config_(config) {}

TeacherRequest VerifierGenerator::request_for(const Instruction& instruction,
                                              const Requirement& requirement) const {
    TeacherRequest req;
    req.model = config_.teacher_model;
    req.messages = {{"user", render_template(prompt("verifier").text,
                                             {{"input", instruction.text},
                                              {"requirement", requirement.text}})}};
    req.temperature = config_.verifier_temperature;
    req.top_p = 1.0;
    req.n = 1;
    req.max_tokens = config_.verifier_max_tokens;
    req.seed = config_.seed;
    return req;
}

VerifierResult VerifierGenerator::generate_verifier(const Instruction& instruction,
                                                    const Requirement& requirement) {
    if (requirement.kind == RequirementKind::universal) {
        throw std::invalid_argument("the universal requirement is never program-checked");
    }
    const std::string where = "req " + std::to_string(requirement.index) + ": ";
    VerifierResult result;
    TeacherRequest request = request_for(instruction, requirement);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string completion;
        try {
            completion = gateway_.complete(request).front();
        } catch (const EndpointFailure& e) {
            result.status = VerifierStatus::teacher_failure;
            result.warnings.push_back(where + "teacher failure, judge-only: " + e.what());
            return result;
        }
        auto parsed = parse_verifier_completion(completion);
        if (parsed.kind == VerifierParseKind::defer) {
            result.status = VerifierStatus::deferred;
            return result;
        }
        if (parsed.kind == VerifierParseKind::code) {
            auto screen = screen_verifier_source(parsed.source);
            if (!screen.accepted) {
                result.status = VerifierStatus::screened_out;
                result.warnings.push_back(where + "program rejected by screening: " + screen.reason);
                return result;
            }
            result.status = VerifierStatus::program;
            result.source = std::move(parsed.source);
            return result;
        }
        if (attempt == 0) {
            request.messages.push_back({"assistant", completion});
            request.messages.push_back({"user", std::string(prompt("verifier_reprompt").text)});
        }
    }
    result.status = VerifierStatus::malformed;
    result.warnings.push_back(where + "malformed verifier completion after reprompt, treated as deferral");
    return result;
}

void tally(VerifierBatchStats& stats, const VerifierResult& result) {
    ++stats.requirements;
    switch (result.status) {
        case VerifierStatus::program: ++stats.with_program; break;
        case VerifierStatus::deferred: ++stats.deferred; break;
        case VerifierStatus::screened_out: ++stats.screened_out; break;
        case VerifierStatus::malformed: ++stats.malformed; break;
        case VerifierStatus::teacher_failure: ++stats.failures; break;
    }
}

}  // namespace checklist_forge
