/// @file prompts.hpp
/// @brief Versioned prompt templates, embedded at build time from prompts/*.txt.

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

namespace checklist_forge {

struct PromptTemplate {
    std::string_view name;
    std::string_view version;
    std::string_view text;
};

/// Throws std::out_of_range for an unknown name.
const PromptTemplate& prompt(std::string_view name);

std::span<const PromptTemplate> all_prompts();

/// "name@version" -> SHA-256 of the template text.
std::map<std::string, std::string> prompt_hashes();

}  // namespace checklist_forge
