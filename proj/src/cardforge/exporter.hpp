#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/prompts.hpp"
#include "cardforge/selection.hpp"

namespace cardforge {

// Keys on disk: system (omitted when absent), user, assistant, culture,
// sample_id.
struct SftRecord {
  std::optional<std::string> system;
  std::string user;
  std::string assistant;
  std::string culture;
  std::string sample_id;
};

// Keys on disk: prompt, chosen, rejected, target_culture, peer_culture,
// sample_id. Experimental: the pairs are not used by any training recipe
// shipped here.
struct PreferenceRecord {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string target_culture;
  std::string peer_culture;
  std::string sample_id;
};

ordered_json to_json(const SftRecord& r);
ordered_json to_json(const PreferenceRecord& r);

/// One record per chosen sample, selection order preserved.
std::vector<SftRecord> export_sft(const SelectionResult& selection, bool include_system, const PromptSet& prompts,
                                  const std::string& culture_name);

struct PeerResponse {
  std::string culture;
  std::string text;
};

struct PreferenceExport {
  std::vector<PreferenceRecord> records;
  std::vector<std::string> skipped;  // sample ids without any usable peer
};

/// For each chosen sample, min(pairs_per_sample, peers) records against
/// distinct peer cultures. Peers are given per sample id in roster order;
/// when there are more than needed a seeded draw picks them. Samples with
/// no peer are skipped, or raise a precondition error with fail_fast.
PreferenceExport export_preference_pairs(const SelectionResult& selection,
                                         const std::map<std::string, std::vector<PeerResponse>>& peers_by_sample,
                                         int pairs_per_sample, std::uint64_t seed, bool fail_fast = false);

enum class ExportFormat { sft, dpo, all };

std::optional<ExportFormat> parse_export_format(std::string_view s);

inline constexpr const char* kExportLedger = "errors.export.jsonl";

/// Reads selection.<code>.jsonl for every culture and writes sft.<code>.jsonl
/// and/or dpo.<code>.jsonl. Returns per-culture line counts.
ordered_json run_export(const RunConfig& config, const PromptSet& prompts, ExportFormat format);

}  // namespace cardforge
