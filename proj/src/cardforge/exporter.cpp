#include "cardforge/exporter.hpp"

#include <algorithm>
#include <set>

#include "cardforge/fileio.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/manifest.hpp"
#include "cardforge/parallel.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/synthesis.hpp"

namespace cardforge {

namespace fs = std::filesystem;

ordered_json to_json(const SftRecord& r) {
  ordered_json j;
  if (r.system) j["system"] = *r.system;
  j["user"] = r.user;
  j["assistant"] = r.assistant;
  j["culture"] = r.culture;
  j["sample_id"] = r.sample_id;
  return j;
}

ordered_json to_json(const PreferenceRecord& r) {
  ordered_json j;
  j["prompt"] = r.prompt;
  j["chosen"] = r.chosen;
  j["rejected"] = r.rejected;
  j["target_culture"] = r.target_culture;
  j["peer_culture"] = r.peer_culture;
  j["sample_id"] = r.sample_id;
  return j;
}

std::vector<SftRecord> export_sft(const SelectionResult& selection, bool include_system, const PromptSet& prompts,
                                  const std::string& culture_name) {
  if (selection.chosen.empty()) {
    throw Error(ErrorKind::precondition, "selection for " + selection.culture + " is empty; nothing to export");
  }
  std::optional<std::string> system;
  if (include_system) system = prompts.render("sft_system", {{"culture_name", culture_name}});
  std::vector<SftRecord> out;
  for (const auto& s : selection.chosen) {
    if (s.question_text.empty() || s.response_text.empty()) {
      throw Error(ErrorKind::schema, "sample " + s.sample_id + " has an empty question or response");
    }
    out.push_back({system, s.question_text, s.response_text, s.culture, s.sample_id});
  }
  return out;
}

PreferenceExport export_preference_pairs(const SelectionResult& selection,
                                         const std::map<std::string, std::vector<PeerResponse>>& peers_by_sample,
                                         int pairs_per_sample, std::uint64_t seed, bool fail_fast) {
  if (pairs_per_sample < 1) {
    throw Error(ErrorKind::invalid_argument, "pairs_per_sample must be positive", "pairs_per_sample");
  }
  PreferenceExport out;
  for (const auto& s : selection.chosen) {
    std::vector<const PeerResponse*> usable;
    std::set<std::string> cultures;
    if (auto it = peers_by_sample.find(s.sample_id); it != peers_by_sample.end()) {
      for (const auto& p : it->second) {
        if (p.culture == s.culture || p.text == s.response_text || p.text.empty()) continue;
        if (!cultures.insert(p.culture).second) continue;
        usable.push_back(&p);
      }
    }
    if (usable.empty()) {
      if (fail_fast) {
        throw Error(ErrorKind::precondition, "sample " + s.sample_id + " has no peer response to pair against");
      }
      out.skipped.push_back(s.sample_id);
      continue;
    }
    std::vector<std::size_t> picks(usable.size());
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    if (usable.size() > static_cast<std::size_t>(pairs_per_sample)) {
      Rng rng(derive_seed(seed, "preference", s.sample_id));
      picks = sample_indices(usable.size(), static_cast<std::size_t>(pairs_per_sample), rng);
      std::sort(picks.begin(), picks.end());
    }
    for (auto i : picks) {
      out.records.push_back({s.question_text, s.response_text, usable[i]->text, s.culture, usable[i]->culture,
                             s.sample_id});
    }
  }
  return out;
}

std::optional<ExportFormat> parse_export_format(std::string_view s) {
  if (s == "sft") return ExportFormat::sft;
  if (s == "dpo") return ExportFormat::dpo;
  if (s == "all") return ExportFormat::all;
  return std::nullopt;
}

namespace {

std::string require_input(const fs::path& run_dir, const std::string& name, const char* hint) {
  fs::path p = run_dir / name;
  if (!fs::exists(p)) throw Error(ErrorKind::config, "missing input " + p.string() + " (" + hint + ")", name);
  return p.string();
}

}  // namespace

ordered_json run_export(const RunConfig& config, const PromptSet& prompts, ExportFormat format) {
  const fs::path run_dir = config.run_dir;
  const auto& roster = config.cultures;
  std::vector<SelectionResult> selections;
  for (const auto& c : roster) {
    auto path = require_input(run_dir, "selection." + c.code + ".jsonl", "run select first");
    selections.push_back({c.code, read_scored_samples(path), config.budget_per_culture, config.scoring_mode});
  }

  // Peer material per chosen sample, grouped through the universal parent
  // question shared by all cultures' versions of a question.
  std::map<std::string, std::vector<PeerResponse>> peers_by_sample;
  std::string peer_source_sha;
  if (format != ExportFormat::sft) {
    const auto questions = read_questions(require_input(run_dir, "questions.adapted.jsonl", "run synthesize first"));
    std::map<std::string, std::string> parent_of;
    for (const auto& q : questions) parent_of[q.id] = q.parent_id.value_or(q.id);
    const bool contrastive = config.dispreferred_source == DispreferredSource::contrastive;
    const auto source_path = require_input(
        run_dir, contrastive ? "responses.contrastive.jsonl" : "responses.isolated.jsonl", "run synthesize first");
    peer_source_sha = sha256_file(source_path);
    std::map<std::string, std::vector<const ResponseRecord*>> by_parent;
    const auto responses = read_responses(source_path);
    for (const auto& r : responses) {
      std::string key = r.question_id;
      if (contrastive) {
        auto it = parent_of.find(r.question_id);
        if (it == parent_of.end()) continue;
        key = it->second;
      }
      by_parent[key].push_back(&r);
    }
    std::map<std::string, std::size_t> roster_pos;
    for (std::size_t i = 0; i < roster.size(); ++i) roster_pos[roster[i].code] = i;
    for (const auto& sel : selections) {
      for (const auto& s : sel.chosen) {
        auto parent = parent_of.find(s.question_id);
        if (parent == parent_of.end()) {
          throw Error(ErrorKind::schema, "selected sample " + s.sample_id + " refers to unknown question " +
                                             s.question_id, "question_id");
        }
        std::vector<const ResponseRecord*> matched;
        if (auto it = by_parent.find(parent->second); it != by_parent.end()) matched = it->second;
        std::stable_sort(matched.begin(), matched.end(), [&](const auto* a, const auto* b) {
          auto pa = roster_pos.count(a->culture) ? roster_pos[a->culture] : roster.size();
          auto pb = roster_pos.count(b->culture) ? roster_pos[b->culture] : roster.size();
          return pa < pb;
        });
        auto& peers = peers_by_sample[s.sample_id];
        for (const auto* r : matched) {
          if (r->culture != s.culture) peers.push_back({r->culture, r->text});
        }
      }
    }
  }

  std::vector<std::vector<std::string>> sft_lines(roster.size()), dpo_lines(roster.size());
  std::vector<std::vector<std::string>> skipped(roster.size());
  parallel_for(roster.size(), config.max_in_flight, [&](std::size_t i) {
    if (format != ExportFormat::dpo) {
      for (const auto& r : export_sft(selections[i], config.include_system, prompts, roster[i].display_name)) {
        sft_lines[i].push_back(canonical_dump(to_json(r)));
      }
    }
    if (format != ExportFormat::sft) {
      auto pref = export_preference_pairs(selections[i], peers_by_sample, config.pairs_per_sample, config.seed,
                                          config.fail_fast);
      for (const auto& r : pref.records) dpo_lines[i].push_back(canonical_dump(to_json(r)));
      skipped[i] = std::move(pref.skipped);
    }
  });

  RunManifest manifest = load_manifest(run_dir);
  manifest.tool_version = CARDFORGE_VERSION;
  manifest.config_hash = config_hash(config);
  manifest.seed = config.seed;
  ordered_json settings = to_json(config);
  ordered_json fp_fields = ordered_json::array({"export", settings["include_system"], settings["pairs_per_sample"],
                                                settings["dispreferred_source"], settings["seed"], prompts.digest(),
                                                peer_source_sha});
  for (const auto& c : roster) fp_fields.push_back(sha256_file((run_dir / ("selection." + c.code + ".jsonl")).string()));
  const std::string fingerprint = content_hash(fp_fields);

  std::vector<std::string> ledger;
  ordered_json report;
  ordered_json sft_counts = ordered_json::object(), dpo_counts = ordered_json::object();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const auto& code = roster[i].code;
    if (format != ExportFormat::dpo) {
      manifest.stage_outputs["sft." + code] = write_stage_file(run_dir, "sft." + code + ".jsonl", sft_lines[i], fingerprint);
      sft_counts[code] = sft_lines[i].size();
    }
    if (format != ExportFormat::sft) {
      manifest.stage_outputs["dpo." + code] = write_stage_file(run_dir, "dpo." + code + ".jsonl", dpo_lines[i], fingerprint);
      dpo_counts[code] = dpo_lines[i].size();
      for (const auto& id : skipped[i]) {
        log().warn("stage=export culture={} sample={} skipped: no peer response", code, id);
        ledger.push_back(canonical_dump(
            to_json(LedgerEntry{"export.dpo", id, code, "warning", "no_peer", "no peer response to pair against"})));
      }
    }
  }
  fileio::write_file_atomic(run_dir / kExportLedger, fileio::jsonl_content(ledger));
  save_manifest(run_dir, manifest);
  if (format != ExportFormat::dpo) report["sft"] = sft_counts;
  if (format != ExportFormat::sft) report["dpo"] = dpo_counts;
  report["skipped"] = ledger.size();
  return report;
}

}  // namespace cardforge
