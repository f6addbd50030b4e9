#pragma once

#include <map>
#include <string>
#include <string_view>

namespace checklist_forge {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);

/// Truncates to at most `max_bytes` without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Single-pass substitution of `{name}` placeholders. Placeholders whose name
/// is not in `values` are left untouched, and substituted text is never
/// rescanned.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

}  // namespace checklist_forge
