#include "cardforge/config.hpp"

#include <array>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "cardforge/http_provider.hpp"

namespace cardforge {

std::string_view to_string(ScoringMode v) { return v == ScoringMode::cluster_size ? "cluster_size" : "in_context"; }
std::string_view to_string(Linkage v) {
  switch (v) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
  }
  return "average";
}
std::string_view to_string(RNormalization v) { return v == RNormalization::max ? "max" : "raw"; }
std::string_view to_string(ClusterText v) { return v == ClusterText::qa ? "qa" : "response"; }
std::string_view to_string(PeerMode v) { return v == PeerMode::same_question ? "same_question" : "random"; }
std::string_view to_string(PeerMaterial v) {
  return v == PeerMaterial::universal_isolated ? "universal_isolated" : "adapted_isolated";
}
std::string_view to_string(DispreferredSource v) {
  return v == DispreferredSource::contrastive ? "contrastive" : "isolated";
}

namespace {

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& key, const std::string& message) {
  throw Error(ErrorKind::config, "config '" + key + "': " + message, key);
}

template <class E, std::size_t N>
E parse_enum(const json& v, const std::string& key, const std::array<E, N>& options) {
  if (!v.is_string()) bad(key, "must be a string");
  for (E e : options) {
    if (to_string(e) == v.get<std::string>()) return e;
  }
  std::string allowed;
  for (E e : options) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(e));
  bad(key, "must be one of " + allowed);
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad(key, "must be an integer");
  return v.get<int>();
}

double get_double(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "must be a number");
  return v.get<double>();
}

std::string get_str(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad(key, "must be a boolean");
  return v.get<bool>();
}

ProviderSettings parse_provider(const json& v, const std::string& key, ProviderSettings base) {
  if (!v.is_object()) bad(key, "must be an object");
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string sub = key + "." + it.key();
    if (it.key() == "provider") base.provider = get_str(*it, sub);
    else if (it.key() == "model") base.model = get_str(*it, sub);
    else if (it.key() == "temperature") base.temperature = get_double(*it, sub);
    else if (it.key() == "max_tokens") base.max_tokens = get_int(*it, sub);
    else bad(sub, "unknown key");
  }
  return base;
}

EmbeddingSettings parse_embedding(const json& v, const std::string& key) {
  if (!v.is_object()) bad(key, "must be an object");
  EmbeddingSettings e;
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string sub = key + "." + it.key();
    if (it.key() == "provider") e.provider = get_str(*it, sub);
    else if (it.key() == "model") e.model = get_str(*it, sub);
    else if (it.key() == "dim") e.dim = get_int(*it, sub);
    else bad(sub, "unknown key");
  }
  return e;
}

RetryPolicy parse_retry(const json& v) {
  if (!v.is_object()) bad("retry", "must be an object");
  RetryPolicy r;
  for (auto it = v.begin(); it != v.end(); ++it) {
    const std::string sub = "retry." + it.key();
    if (it.key() == "max_attempts") r.max_attempts = get_int(*it, sub);
    else if (it.key() == "base_delay_ms") r.base_delay = std::chrono::milliseconds(get_int(*it, sub));
    else if (it.key() == "factor") r.factor = get_double(*it, sub);
    else if (it.key() == "max_delay_ms") r.max_delay = std::chrono::milliseconds(get_int(*it, sub));
    else if (it.key() == "full_jitter") r.full_jitter = get_bool(*it, sub);
    else bad(sub, "unknown key");
  }
  return r;
}

std::vector<Culture> parse_cultures(const json& v) {
  if (!v.is_array()) bad("cultures", "must be an array");
  std::vector<Culture> out;
  for (const auto& e : v) {
    if (e.is_string()) {
      std::string code = e.get<std::string>();
      out.push_back({code, known_culture_name(code)});
    } else if (e.is_object()) {
      if (!e.contains("code") || !e["code"].is_string()) bad("cultures", "entries need a string code");
      std::string code = e["code"].get<std::string>();
      std::string name = e.contains("display_name") ? get_str(e["display_name"], "cultures.display_name")
                                                    : known_culture_name(code);
      out.push_back({code, name});
    } else {
      bad("cultures", "entries must be codes or {code, display_name} objects");
    }
  }
  return out;
}

ordered_json provider_json(const ProviderSettings& p) {
  ordered_json j;
  j["provider"] = p.provider;
  j["model"] = p.model;
  j["temperature"] = p.temperature;
  j["max_tokens"] = p.max_tokens;
  return j;
}

const std::set<std::string> kLlmProviders{"mock", "openai"};
const std::set<std::string> kEmbeddingProviders{"fallback", "openai"};

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
  RunConfig c;
  // Generation first so the inheriting sections see its final value.
  if (j.contains("generation")) c.generation = parse_provider(j["generation"], "generation", c.generation);
  c.probe_model = c.generation;
  c.eval_model = c.generation;
  c.judge.provider = c.generation.provider;

  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = *it;
    if (key == "generation") continue;
    if (key == "cultures") c.cultures = parse_cultures(v);
    else if (key == "taxonomy") c.taxonomy = get_str(v, key);
    else if (key == "strict_count") c.strict_count = get_bool(v, key);
    else if (key == "topics") {
      if (!v.is_array()) bad(key, "must be an array of topic ids");
      c.topics.clear();
      for (const auto& t : v) c.topics.push_back(get_str(t, key));
    } else if (key == "max_topics") c.max_topics = get_int(v, key);
    else if (key == "k_questions_per_topic") c.k_questions_per_topic = get_int(v, key);
    else if (key == "qtype_cycle") {
      if (!v.is_array() || v.empty()) bad(key, "must be a non-empty array");
      c.qtype_cycle.clear();
      for (const auto& t : v) {
        auto q = parse_question_type(get_str(t, key));
        if (!q) bad(key, "unknown question type");
        c.qtype_cycle.push_back(*q);
      }
    } else if (key == "refill_rounds") c.refill_rounds = get_int(v, key);
    else if (key == "adapt_temperature") c.adapt_temperature = get_double(v, key);
    else if (key == "contrastive_peers") c.contrastive_peers = get_int(v, key);
    else if (key == "peer_material")
      c.peer_material = parse_enum(v, key, std::array{PeerMaterial::universal_isolated, PeerMaterial::adapted_isolated});
    else if (key == "theta") c.theta = get_double(v, key);
    else if (key == "linkage")
      c.linkage = parse_enum(v, key, std::array{Linkage::average, Linkage::single, Linkage::complete});
    else if (key == "budget_per_culture") c.budget_per_culture = get_int(v, key);
    else if (key == "scoring_mode")
      c.scoring_mode = parse_enum(v, key, std::array{ScoringMode::cluster_size, ScoringMode::in_context});
    else if (key == "r_normalization")
      c.r_normalization = parse_enum(v, key, std::array{RNormalization::max, RNormalization::raw});
    else if (key == "cluster_text") c.cluster_text = parse_enum(v, key, std::array{ClusterText::qa, ClusterText::response});
    else if (key == "peer_mode") c.peer_mode = parse_enum(v, key, std::array{PeerMode::same_question, PeerMode::random});
    else if (key == "distinctiveness_peers") c.distinctiveness_peers = get_int(v, key);
    else if (key == "shots") c.shots = get_int(v, key);
    else if (key == "probes_per_culture") c.probes_per_culture = get_int(v, key);
    else if (key == "probes_path") c.probes_path = get_str(v, key);
    else if (key == "dispreferred_source")
      c.dispreferred_source =
          parse_enum(v, key, std::array{DispreferredSource::contrastive, DispreferredSource::isolated});
    else if (key == "pairs_per_sample") c.pairs_per_sample = get_int(v, key);
    else if (key == "include_system") c.include_system = get_bool(v, key);
    else if (key == "probe_model") c.probe_model = parse_provider(v, key, c.probe_model);
    else if (key == "eval_model") c.eval_model = parse_provider(v, key, c.eval_model);
    else if (key == "judge") c.judge = parse_provider(v, key, c.judge);
    else if (key == "embedding") c.embedding = parse_embedding(v, key);
    else if (key == "max_in_flight") c.max_in_flight = get_int(v, key);
    else if (key == "retry") c.retry = parse_retry(v);
    else if (key == "fail_fast") c.fail_fast = get_bool(v, key);
    else if (key == "max_failure_rate") c.max_failure_rate = get_double(v, key);
    else if (key == "run_dir") c.run_dir = get_str(v, key);
    else if (key == "cache_dir") c.cache_dir = get_str(v, key);
    else if (key == "prompts_dir") c.prompts_dir = get_str(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        bad(key, "must be a non-negative integer");
      }
      c.seed = v.get<std::uint64_t>();
    } else bad(key, "unknown key");
  }
  validate(c);
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  ordered_json cultures = ordered_json::array();
  for (const auto& cu : c.cultures) cultures.push_back(to_json(cu));
  j["cultures"] = cultures;
  j["taxonomy"] = c.taxonomy;
  j["strict_count"] = c.strict_count;
  j["topics"] = c.topics;
  j["max_topics"] = c.max_topics;
  j["k_questions_per_topic"] = c.k_questions_per_topic;
  ordered_json cycle = ordered_json::array();
  for (auto q : c.qtype_cycle) cycle.push_back(to_string(q));
  j["qtype_cycle"] = cycle;
  j["refill_rounds"] = c.refill_rounds;
  j["adapt_temperature"] = c.adapt_temperature;
  j["contrastive_peers"] = c.contrastive_peers;
  j["peer_material"] = to_string(c.peer_material);
  j["theta"] = c.theta;
  j["linkage"] = to_string(c.linkage);
  j["budget_per_culture"] = c.budget_per_culture;
  j["scoring_mode"] = to_string(c.scoring_mode);
  j["r_normalization"] = to_string(c.r_normalization);
  j["cluster_text"] = to_string(c.cluster_text);
  j["peer_mode"] = to_string(c.peer_mode);
  j["distinctiveness_peers"] = c.distinctiveness_peers;
  j["shots"] = c.shots;
  j["probes_per_culture"] = c.probes_per_culture;
  j["probes_path"] = c.probes_path;
  j["dispreferred_source"] = to_string(c.dispreferred_source);
  j["pairs_per_sample"] = c.pairs_per_sample;
  j["include_system"] = c.include_system;
  j["generation"] = provider_json(c.generation);
  j["probe_model"] = provider_json(c.probe_model);
  j["eval_model"] = provider_json(c.eval_model);
  j["judge"] = provider_json(c.judge);
  ordered_json emb;
  emb["provider"] = c.embedding.provider;
  emb["model"] = c.embedding.model;
  emb["dim"] = c.embedding.dim;
  j["embedding"] = emb;
  j["seed"] = c.seed;
  j["max_in_flight"] = c.max_in_flight;
  ordered_json retry;
  retry["max_attempts"] = c.retry.max_attempts;
  retry["base_delay_ms"] = c.retry.base_delay.count();
  retry["factor"] = c.retry.factor;
  retry["max_delay_ms"] = c.retry.max_delay.count();
  retry["full_jitter"] = c.retry.full_jitter;
  j["retry"] = retry;
  j["fail_fast"] = c.fail_fast;
  j["max_failure_rate"] = c.max_failure_rate;
  j["run_dir"] = c.run_dir;
  j["cache_dir"] = c.cache_dir;
  j["prompts_dir"] = c.prompts_dir;
  return j;
}

void validate(const RunConfig& c) {
  if (c.cultures.size() < 2) bad("cultures", "at least two cultures are required (distinctiveness needs peers)");
  std::set<std::string> codes;
  for (const auto& cu : c.cultures) {
    if (cu.code.empty()) bad("cultures", "culture codes must be non-empty");
    if (!codes.insert(cu.code).second) bad("cultures", "duplicate culture code " + cu.code);
  }
  if (!(c.theta > 0.0 && c.theta <= 1.0)) bad("theta", "must lie in (0, 1]");
  if (c.k_questions_per_topic < 1) bad("k_questions_per_topic", "must be positive");
  if (c.budget_per_culture < 1) bad("budget_per_culture", "must be positive");
  if (c.max_topics < 0) bad("max_topics", "must be non-negative");
  if (c.refill_rounds < 0) bad("refill_rounds", "must be non-negative");
  if (c.contrastive_peers < 0) bad("contrastive_peers", "must be non-negative");
  if (c.distinctiveness_peers < 1) bad("distinctiveness_peers", "must be positive");
  if (c.shots < 1) bad("shots", "must be positive");
  if (c.probes_per_culture < 1) bad("probes_per_culture", "must be positive");
  if (c.pairs_per_sample < 1) bad("pairs_per_sample", "must be positive");
  if (c.max_in_flight < 1) bad("max_in_flight", "must be positive");
  if (c.retry.max_attempts < 1) bad("retry.max_attempts", "must be positive");
  if (c.retry.factor < 1.0) bad("retry.factor", "must be at least 1");
  if (!(c.max_failure_rate >= 0.0 && c.max_failure_rate <= 1.0)) bad("max_failure_rate", "must lie in [0, 1]");
  if (c.run_dir.empty()) bad("run_dir", "must be non-empty");
  for (const auto* p : {&c.generation, &c.probe_model, &c.eval_model, &c.judge}) {
    if (!kLlmProviders.count(p->provider)) bad("provider", "unknown provider '" + p->provider + "' (mock, openai)");
    if (p->temperature < 0.0) bad("temperature", "must be non-negative");
    if (p->max_tokens < 1) bad("max_tokens", "must be positive");
  }
  if (!kEmbeddingProviders.count(c.embedding.provider)) {
    bad("embedding.provider", "unknown embedding provider '" + c.embedding.provider + "' (fallback, openai)");
  }
  if (c.embedding.provider == "fallback" && c.embedding.dim < 16) bad("embedding.dim", "must be at least 16");
}

void validate_environment(const RunConfig& c) {
  bool remote = c.embedding.provider != "fallback";
  for (const auto* p : {&c.generation, &c.probe_model, &c.eval_model, &c.judge}) remote |= p->provider != "mock";
  if (remote) endpoint_from_env();
}

std::string config_hash(const RunConfig& c) {
  ordered_json j = to_json(c);
  for (const char* key : {"max_in_flight", "retry", "fail_fast", "max_failure_rate", "run_dir", "cache_dir"}) {
    j.erase(key);
  }
  return content_hash(j);
}

std::string effective_cache_dir(const RunConfig& c) {
  if (!c.cache_dir.empty()) return c.cache_dir;
  if (const char* env = std::getenv("CARDFORGE_CACHE_DIR"); env && *env) return env;
  return (std::filesystem::path(c.run_dir) / "cache").string();
}

}  // namespace cardforge
