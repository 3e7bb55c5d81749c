#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cardforge/records.hpp"

namespace cardforge {

inline constexpr const char* kManifestFile = "manifest.json";

/// Empty manifest when the file does not exist; a schema error when it is
/// unreadable.
RunManifest load_manifest(const std::filesystem::path& run_dir);

/// Pretty-printed, atomically replaced.
void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

/// A stage is fresh when the manifest lists it with the same fingerprint and
/// the file on disk still hashes to the recorded digest.
bool stage_is_fresh(const RunManifest& manifest, const std::filesystem::path& run_dir, const std::string& stage,
                    const std::string& fingerprint);

/// Writes `lines` as JSONL under the run directory and describes the result.
StageOutput write_stage_file(const std::filesystem::path& run_dir, const std::string& relative_path,
                             const std::vector<std::string>& lines, const std::string& fingerprint);

/// Describes an already written file.
StageOutput describe_file(const std::filesystem::path& run_dir, const std::string& relative_path,
                          std::uint64_t records, const std::string& fingerprint);

/// True when every file the manifest references re-hashes to its digest.
bool manifest_matches_disk(const RunManifest& manifest, const std::filesystem::path& run_dir);

}  // namespace cardforge
