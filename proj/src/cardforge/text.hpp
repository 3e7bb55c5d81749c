#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cardforge::text {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Lowercase, collapse runs of whitespace, trim. Used for duplicate checks.
std::string normalize_for_dedup(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool istarts_with(std::string_view s, std::string_view prefix);

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view s);

/// Decodes UTF-8 into code points; assumes valid input (sanitize first).
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(const std::u32string& cps);

}  // namespace cardforge::text
