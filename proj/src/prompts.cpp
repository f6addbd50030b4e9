#include "checklist_forge/prompts.hpp"

#include <stdexcept>

#include "checklist_forge/text_util.hpp"

namespace checklist_forge {

// Defined in the generated prompts_generated.cpp.
extern const PromptTemplate kPromptTable[];
extern const std::size_t kPromptCount;

std::span<const PromptTemplate> all_prompts() { return {kPromptTable, kPromptCount}; }

const PromptTemplate& prompt(std::string_view name) {
    for (const auto& p : all_prompts()) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("unknown prompt template '" + std::string(name) + "'");
}

std::map<std::string, std::string> prompt_hashes() {
    std::map<std::string, std::string> out;
    for (const auto& p : all_prompts()) {
        out[std::string(p.name) + "@" + std::string(p.version)] = sha256_hex(p.text);
    }
    return out;
}

}  // namespace checklist_forge
