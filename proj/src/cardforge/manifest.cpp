#include "cardforge/manifest.hpp"

#include "cardforge/fileio.hpp"

namespace cardforge {

namespace fs = std::filesystem;

RunManifest load_manifest(const fs::path& run_dir) {
  const fs::path path = run_dir / kManifestFile;
  if (!fs::exists(path)) return {};
  try {
    return manifest_from_json(nlohmann::json::parse(fileio::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(ErrorKind::schema, path.string() + ": " + e.what(), e.field());
  }
}

void save_manifest(const fs::path& run_dir, const RunManifest& manifest) {
  fileio::ensure_directory(run_dir);
  fileio::write_file_atomic(run_dir / kManifestFile, to_json(manifest).dump(2) + "\n");
}

bool stage_is_fresh(const RunManifest& manifest, const fs::path& run_dir, const std::string& stage,
                    const std::string& fingerprint) {
  auto it = manifest.stage_outputs.find(stage);
  if (it == manifest.stage_outputs.end() || it->second.fingerprint != fingerprint) return false;
  const fs::path path = run_dir / it->second.path;
  if (!fs::exists(path)) return false;
  return sha256_file(path.string()) == it->second.sha256;
}

StageOutput write_stage_file(const fs::path& run_dir, const std::string& relative_path,
                             const std::vector<std::string>& lines, const std::string& fingerprint) {
  const std::string content = fileio::jsonl_content(lines);
  fileio::write_file_atomic(run_dir / relative_path, content);
  return {relative_path, lines.size(), sha256_hex(content), fingerprint};
}

StageOutput describe_file(const fs::path& run_dir, const std::string& relative_path, std::uint64_t records,
                          const std::string& fingerprint) {
  return {relative_path, records, sha256_file((run_dir / relative_path).string()), fingerprint};
}

bool manifest_matches_disk(const RunManifest& manifest, const fs::path& run_dir) {
  for (const auto& [stage, out] : manifest.stage_outputs) {
    const fs::path path = run_dir / out.path;
    if (!fs::exists(path) || sha256_file(path.string()) != out.sha256) return false;
  }
  return true;
}

}  // namespace cardforge
