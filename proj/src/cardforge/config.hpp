#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardforge/gateway.hpp"
#include "cardforge/records.hpp"

namespace cardforge {

enum class ScoringMode { cluster_size, in_context };
enum class Linkage { average, single, complete };
enum class RNormalization { max, raw };
enum class ClusterText { qa, response };
enum class PeerMode { same_question, random };
enum class PeerMaterial { universal_isolated, adapted_isolated };
enum class DispreferredSource { contrastive, isolated };

std::string_view to_string(ScoringMode v);
std::string_view to_string(Linkage v);
std::string_view to_string(RNormalization v);
std::string_view to_string(ClusterText v);
std::string_view to_string(PeerMode v);
std::string_view to_string(PeerMaterial v);
std::string_view to_string(DispreferredSource v);

struct ProviderSettings {
  std::string provider = "mock";  // "mock" or "openai"
  std::string model = "gpt-4o-mini";
  double temperature = 0.7;
  int max_tokens = 1024;

  bool operator==(const ProviderSettings&) const = default;
};

struct EmbeddingSettings {
  std::string provider = "fallback";  // "fallback" or "openai"
  std::string model = "text-embedding-3-small";
  int dim = 256;

  bool operator==(const EmbeddingSettings&) const = default;
};

struct RunConfig {
  // corpus scope
  std::vector<Culture> cultures = default_roster();
  std::string taxonomy = "builtin";
  bool strict_count = true;
  std::vector<std::string> topics;  // empty: every topic
  int max_topics = 0;               // 0: no limit

  // synthesis
  int k_questions_per_topic = 100;
  std::vector<QuestionType> qtype_cycle{QuestionType::scenario, QuestionType::value_oriented,
                                        QuestionType::open_ended};
  int refill_rounds = 3;
  double adapt_temperature = 0.0;
  int contrastive_peers = 0;  // 0: every other culture in the roster
  PeerMaterial peer_material = PeerMaterial::universal_isolated;

  // selection
  double theta = 0.7;
  Linkage linkage = Linkage::average;
  int budget_per_culture = 1000;
  ScoringMode scoring_mode = ScoringMode::cluster_size;
  RNormalization r_normalization = RNormalization::max;
  ClusterText cluster_text = ClusterText::qa;
  PeerMode peer_mode = PeerMode::same_question;
  int distinctiveness_peers = 4;
  int shots = 5;
  int probes_per_culture = 20;
  std::string probes_path;  // empty: bundled sample probes

  // export
  DispreferredSource dispreferred_source = DispreferredSource::contrastive;
  int pairs_per_sample = 1;
  bool include_system = true;

  // providers
  ProviderSettings generation;
  ProviderSettings probe_model;
  ProviderSettings eval_model;
  ProviderSettings judge{"mock", "gpt-4o", 0.0, 256};
  EmbeddingSettings embedding;

  // operation (excluded from the config hash)
  int max_in_flight = 8;
  RetryPolicy retry;
  bool fail_fast = false;
  double max_failure_rate = 0.05;
  std::string run_dir = "run";
  std::string cache_dir;    // empty: $CARDFORGE_CACHE_DIR or <run_dir>/cache
  std::string prompts_dir;  // empty: bundled prompts

  std::uint64_t seed = 42;
};

/// Strict decoding: unknown keys and out-of-range values are config errors.
/// Absent probe_model / eval_model / judge sections inherit the generation
/// provider.
RunConfig config_from_json(const nlohmann::json& j);

ordered_json to_json(const RunConfig& c);

void validate(const RunConfig& c);

/// Fails with a config error naming CARDFORGE_API_KEY when a remote provider
/// is configured without credentials.
void validate_environment(const RunConfig& c);

/// Digest of every output-affecting setting (operational keys excluded).
std::string config_hash(const RunConfig& c);

std::string effective_cache_dir(const RunConfig& c);

}  // namespace cardforge
