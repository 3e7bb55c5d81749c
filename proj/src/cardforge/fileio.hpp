#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cardforge::fileio {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Non-empty lines of a JSONL file (LF terminated, no BOM).
std::vector<std::string> read_jsonl_lines(const fs::path& path);

/// Joins lines with LF terminators.
std::string jsonl_content(const std::vector<std::string>& lines);

void ensure_directory(const fs::path& dir);

}  // namespace cardforge::fileio
