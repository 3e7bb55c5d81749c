#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/embedding.hpp"
#include "cardforge/model.hpp"
#include "cardforge/records.hpp"

namespace cardforge {

struct Cluster {
  std::int64_t cluster_id = 0;
  std::vector<std::string> member_ids;  // ascending
  std::string center_id;
};

/// Agglomerative clustering over unit vectors given as rows. Returns clusters
/// as ascending row-index lists ordered by their smallest member. Each step
/// merges the pair with the highest linkage similarity while it exceeds
/// theta; among equal values the pair with the lexicographically smallest
/// (min-member, min-member) indices wins.
std::vector<std::vector<std::size_t>> cluster_rows(const std::vector<std::vector<double>>& rows, double theta,
                                                   Linkage linkage = Linkage::average);

/// Clusters keyed by sample id. Rows are ordered by sample id before
/// merging, so the result does not depend on input order. cluster_id is the
/// position in the returned list; centres are filled in.
std::vector<Cluster> cluster_samples(const std::map<std::string, EmbeddingVector>& vectors, double theta,
                                     Linkage linkage = Linkage::average);

/// Member with the largest summed cosine to the other members; sums within
/// 1e-12 of each other count as equal and the smaller id wins.
std::string cluster_center(const Cluster& cluster, const std::map<std::string, EmbeddingVector>& vectors);

/// size / max_size.
double representativeness_cluster_size(const Cluster& cluster, std::size_t max_size);

struct Probe {
  std::string question;
  std::vector<std::string> options;
  int gold = 0;
  std::string topic;
  std::string culture;  // empty: applies to every culture
};

struct ProbeSet {
  std::vector<Probe> items;

  /// Probes for one culture (untagged items included), first `limit` kept.
  ProbeSet for_culture(const std::string& culture, std::size_t limit) const;
};

ProbeSet parse_probe_set(std::string_view jsonl, const std::string& origin);
/// Empty path: the bundled sample probes.
ProbeSet load_probe_set(const std::string& path);

struct ClusterSample {
  std::string sample_id;
  std::string question_text;
  std::string response_text;
};

/// Few-shot accuracy: `shots` members (centre first, then by descending
/// similarity to the centre, ties by id) form the prompt prefix for every
/// probe; r = fraction answered with the gold option. Failed or unparseable
/// answers count as wrong.
double representativeness_in_context(const ClusterSample& center, const std::vector<ClusterSample>& members,
                                     const std::map<std::string, EmbeddingVector>& vectors, const ProbeSet& probes,
                                     ModelUnderTest& model, int shots, const PromptSet& prompts,
                                     const std::string& culture_name);

/// Mean of (1 - cosine(target, peer)) over the peers.
double distinctiveness(std::span<const double> target, const std::vector<std::span<const double>>& peers);
double distinctiveness(const EmbeddingVector& target, const std::vector<EmbeddingVector>& peers);

/// r * d.
double combined_score(double r, double d);

struct SelectionResult {
  std::string culture;
  std::vector<ScoredSample> chosen;
  int budget = 0;
  ScoringMode scoring_mode = ScoringMode::cluster_size;
};

/// Candidates sorted by s descending, then sample_id ascending; the first
/// `budget` are kept. Candidates without a score are an error.
SelectionResult select(const std::vector<ScoredSample>& candidates, int budget, const std::string& culture,
                       ScoringMode mode = ScoringMode::cluster_size);

struct SelectionSummary {
  ordered_json report;
  std::map<std::string, std::size_t> chosen_per_culture;
};

/// Embeds, clusters, scores and selects every culture of the run. Reads the
/// synthesis outputs from config.run_dir and writes samples.scored.jsonl,
/// selection.<code>.jsonl, selection.summary.json and the embedding sidecar.
SelectionSummary run_selection(const RunConfig& config, Gateway& gateway, const PromptSet& prompts,
                               std::shared_ptr<EmbeddingProvider> embedder);

/// Embedding text of a sample under the configured cluster_text mode.
std::string sample_text(ClusterText mode, std::string_view question, std::string_view response);

}  // namespace cardforge
