// cardforge: command-line front end over the C API.
//
// Settings come from --config (a JSON object) with flag overrides on top.
// Summaries go to stdout, logs to stderr, data to the run directory.
// Exit codes: 0 ok, 2 config, 3 provider, 4 schema, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cardforge/cardforge.h"
#include "json.hpp"

using nlohmann::json;

namespace {

int exit_code(cf_status s) {
  switch (s) {
    case CF_OK: return 0;
    case CF_ERR_CONFIG: return 2;
    case CF_ERR_PROVIDER: return 3;
    case CF_ERR_SCHEMA: return 4;
    default: return 1;
  }
}

int report_failure(cf_status s) {
  std::fprintf(stderr, "error: %s\n", cf_last_error());
  return exit_code(s);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config overrides shared by every subcommand. Unset flags leave the file
// value (or the built-in default) alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> run_dir, cache_dir, prompts_dir, cultures, taxonomy, topics;
  std::optional<std::uint64_t> seed;
  bool no_strict_count = false;
  std::optional<int> max_topics, k, refill_rounds, contrastive_peers, budget, distinctiveness_peers, shots,
      probes_per_culture, pairs_per_sample, max_in_flight, embedding_dim;
  std::optional<std::string> peer_material, linkage, scoring_mode, r_normalization, cluster_text, peer_mode,
      probes, dispreferred_source, generation_provider, generation_model, probe_provider, probe_model,
      embedding_provider, embedding_model;
  std::optional<double> theta, temperature, adapt_temperature, max_failure_rate;
  bool no_system = false;
  bool fail_fast = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--run-dir", run_dir, "Run directory (default: run)");
    app->add_option("--cache-dir", cache_dir, "Cache directory (default: $CARDFORGE_CACHE_DIR or <run-dir>/cache)");
    app->add_option("--prompts-dir", prompts_dir, "Directory of prompt template overrides");
    app->add_option("--seed", seed, "Run seed (default 42)");
    app->add_option("--cultures", cultures, "Comma-separated culture codes (default GB,CN,KR,IN,SG)");
    app->add_option("--taxonomy", taxonomy, "\"builtin\" or a taxonomy JSONL path");
    app->add_flag("--no-strict-count", no_strict_count, "Accept custom taxonomies without the 38-topic layout");
    app->add_option("--topics", topics, "Comma-separated topic ids to synthesize");
    app->add_option("--max-topics", max_topics, "Use at most this many topics (0: all)");
    app->add_option("--k", k, "Questions per topic (default 100)");
    app->add_option("--refill-rounds", refill_rounds, "Extra generation rounds to replace duplicates (default 3)");
    app->add_option("--contrastive-peers", contrastive_peers, "Peer answers shown per contrastive prompt (0: all)");
    app->add_option("--peer-material", peer_material, "universal_isolated or adapted_isolated");
    app->add_option("--generation-provider", generation_provider, "mock or openai");
    app->add_option("--generation-model", generation_model, "Generation model id");
    app->add_option("--temperature", temperature, "Generation temperature (default 0.7)");
    app->add_option("--adapt-temperature", adapt_temperature, "Question adaptation temperature (default 0)");
    app->add_option("--theta", theta, "Clustering similarity threshold in (0, 1] (default 0.7)");
    app->add_option("--linkage", linkage, "average, single or complete");
    app->add_option("--budget", budget, "Samples selected per culture (default 1000)");
    app->add_option("--scoring-mode", scoring_mode, "cluster_size or in_context");
    app->add_option("--r-normalization", r_normalization, "max or raw");
    app->add_option("--cluster-text", cluster_text, "qa or response");
    app->add_option("--peer-mode", peer_mode, "same_question or random");
    app->add_option("--distinctiveness-peers", distinctiveness_peers, "Peers per distinctiveness score (default 4)");
    app->add_option("--shots", shots, "Few-shot examples for in-context scoring (default 5)");
    app->add_option("--probes", probes, "Probe JSONL for in-context scoring (default: bundled sample)");
    app->add_option("--probes-per-culture", probes_per_culture, "Probes per culture (default 20)");
    app->add_option("--probe-provider", probe_provider, "Provider answering in-context probes");
    app->add_option("--probe-model", probe_model, "Model answering in-context probes");
    app->add_option("--embedding-provider", embedding_provider, "fallback or openai");
    app->add_option("--embedding-model", embedding_model, "Embedding model id");
    app->add_option("--embedding-dim", embedding_dim, "Fallback embedding dimension (default 256)");
    app->add_option("--dispreferred-source", dispreferred_source, "contrastive or isolated");
    app->add_option("--pairs-per-sample", pairs_per_sample, "Preference pairs per selected sample (default 1)");
    app->add_flag("--no-system", no_system, "Omit the system field from SFT records");
    app->add_option("--max-in-flight", max_in_flight, "Concurrent provider requests (default 8)");
    app->add_flag("--fail-fast", fail_fast, "Stop at the first item failure");
    app->add_option("--max-failure-rate", max_failure_rate, "Tolerated item failure rate per stage (default 0.05)");
  }

  json build() const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw std::runtime_error("config file " + config_path + " is not valid JSON: " + e.what());
      }
      if (!j.is_object()) throw std::runtime_error("config file " + config_path + " must hold a JSON object");
    }
    auto set = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    set("run_dir", run_dir);
    set("cache_dir", cache_dir);
    set("prompts_dir", prompts_dir);
    set("seed", seed);
    if (cultures) j["cultures"] = split_list(*cultures);
    set("taxonomy", taxonomy);
    if (no_strict_count) j["strict_count"] = false;
    if (topics) j["topics"] = split_list(*topics);
    set("max_topics", max_topics);
    set("k_questions_per_topic", k);
    set("refill_rounds", refill_rounds);
    set("contrastive_peers", contrastive_peers);
    set("peer_material", peer_material);
    set("adapt_temperature", adapt_temperature);
    set("theta", theta);
    set("linkage", linkage);
    set("budget_per_culture", budget);
    set("scoring_mode", scoring_mode);
    set("r_normalization", r_normalization);
    set("cluster_text", cluster_text);
    set("peer_mode", peer_mode);
    set("distinctiveness_peers", distinctiveness_peers);
    set("shots", shots);
    set("probes_path", probes);
    set("probes_per_culture", probes_per_culture);
    set("dispreferred_source", dispreferred_source);
    set("pairs_per_sample", pairs_per_sample);
    if (no_system) j["include_system"] = false;
    set("max_in_flight", max_in_flight);
    if (fail_fast) j["fail_fast"] = true;
    set("max_failure_rate", max_failure_rate);
    auto section = [&](const char* name, const std::optional<std::string>& provider,
                       const std::optional<std::string>& model, const std::optional<double>& temp) {
      if (!provider && !model && !temp) return;
      json& s = j[name];
      if (!s.is_object()) s = json::object();
      if (provider) s["provider"] = *provider;
      if (model) s["model"] = *model;
      if (temp) s["temperature"] = *temp;
    };
    section("generation", generation_provider, generation_model, temperature);
    section("probe_model", probe_provider, probe_model, std::nullopt);
    if (embedding_provider || embedding_model || embedding_dim) {
      json& e = j["embedding"];
      if (!e.is_object()) e = json::object();
      if (embedding_provider) e["provider"] = *embedding_provider;
      if (embedding_model) e["model"] = *embedding_model;
      if (embedding_dim) e["dim"] = *embedding_dim;
    }
    return j;
  }
};

class Context {
 public:
  ~Context() { cf_context_destroy(ctx_); }
  cf_status open(const json& config) { return cf_context_create(config.dump().c_str(), &ctx_); }
  cf_context* get() const { return ctx_; }

 private:
  cf_context* ctx_ = nullptr;
};

int emit(cf_status s, char* out) {
  if (s != CF_OK) return report_failure(s);
  if (out) {
    std::printf("%s\n", out);
    cf_string_free(out);
  }
  return 0;
}

template <class Fn>
int with_context(const Overrides& o, Fn&& fn) {
  json config;
  try {
    config = o.build();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  Context ctx;
  if (cf_status s = ctx.open(config); s != CF_OK) return report_failure(s);
  char* out = nullptr;
  cf_status s = fn(ctx.get(), &out);
  return emit(s, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Builds culture-specific fine-tuning corpora: synthesis, selection, export, evaluation, analysis."};
  app.require_subcommand(1);
  app.set_version_flag("--version", cf_version());

  Overrides synth_o, select_o, export_o, eval_o, analyze_o, config_o;

  auto* synth = app.add_subcommand("synthesize", "Generate questions and culture-conditioned responses");
  synth_o.attach(synth);

  auto* sel = app.add_subcommand("select", "Embed, cluster, score and select samples per culture");
  select_o.attach(sel);

  auto* exp = app.add_subcommand("export", "Write SFT and preference-pair corpora from the selections");
  export_o.attach(exp);
  std::string format = "all";
  exp->add_option("--format", format, "sft, dpo or all")->check(CLI::IsMember({"sft", "dpo", "all"}));

  auto* ev = app.add_subcommand("evaluate", "Score a model on opinion, binary-group and judged open suites");
  eval_o.attach(ev);
  std::string suite = "all";
  std::string model_spec, judge_spec, data_dir, culture, report_path;
  bool raw_divergence = false;
  ev->add_option("--suite", suite, "opinion, binary, open or all")
      ->check(CLI::IsMember({"opinion", "binary", "open", "all"}));
  ev->add_option("--model", model_spec, "Model under test as provider[:model] (default: eval_model section)");
  ev->add_option("--judge", judge_spec, "Judge as provider[:model] (default: judge section)");
  ev->add_option("--data-dir", data_dir, "Directory with opinion.jsonl, binary_groups.jsonl, open_items.jsonl");
  ev->add_option("--culture", culture, "Gold column for the opinion suite (default: first culture)");
  ev->add_flag("--raw-divergence", raw_divergence, "Report 1 - JSD instead of 1 - sqrt(JSD)");
  ev->add_option("--report", report_path, "Report path (default <run-dir>/eval_report.json)");

  auto* an = app.add_subcommand("analyze", "Per-culture tf-idf terms and a 2-D embedding projection");
  analyze_o.attach(an);
  int top_terms = 20;
  std::string source = "selection";
  an->add_option("--top-terms", top_terms, "Terms per culture (default 20)")->check(CLI::PositiveNumber);
  an->add_option("--source", source, "selection or scored")->check(CLI::IsMember({"selection", "scored"}));

  auto* tax = app.add_subcommand("taxonomy", "Inspect the cultural taxonomy");
  tax->require_subcommand(1);
  auto* dump = tax->add_subcommand("dump", "Print the taxonomy as JSONL");
  std::string tax_source = "builtin";
  bool tax_no_strict = false;
  std::string tax_output;
  dump->add_option("--taxonomy", tax_source, "\"builtin\" or a taxonomy JSONL path");
  dump->add_flag("--no-strict-count", tax_no_strict, "Accept custom taxonomies without the 38-topic layout");
  dump->add_option("--output", tax_output, "Write to a file instead of stdout");

  auto* cfg = app.add_subcommand("config", "Print the effective configuration");
  config_o.attach(cfg);

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    return with_context(synth_o, [](cf_context* c, char** out) { return cf_synthesize(c, out); });
  }
  if (sel->parsed()) {
    return with_context(select_o, [](cf_context* c, char** out) { return cf_select(c, out); });
  }
  if (exp->parsed()) {
    return with_context(export_o, [&](cf_context* c, char** out) { return cf_export(c, format.c_str(), out); });
  }
  if (ev->parsed()) {
    json options = json::object();
    options["suites"] = json::array({suite});
    if (!model_spec.empty()) options["model"] = model_spec;
    if (!judge_spec.empty()) options["judge"] = judge_spec;
    if (!data_dir.empty()) options["data_dir"] = data_dir;
    if (!culture.empty()) options["culture"] = culture;
    if (raw_divergence) options["raw_divergence"] = true;
    if (!report_path.empty()) options["report_path"] = report_path;
    const std::string text = options.dump();
    return with_context(eval_o, [&](cf_context* c, char** out) { return cf_evaluate(c, text.c_str(), out); });
  }
  if (an->parsed()) {
    return with_context(analyze_o,
                        [&](cf_context* c, char** out) { return cf_analyze(c, top_terms, source.c_str(), out); });
  }
  if (dump->parsed()) {
    char* out = nullptr;
    cf_status s = cf_taxonomy_dump(tax_source.c_str(), tax_no_strict ? 0 : 1, &out);
    if (s != CF_OK) return report_failure(s);
    std::string text(out);
    cf_string_free(out);
    if (tax_output.empty()) {
      std::fwrite(text.data(), 1, text.size(), stdout);
    } else {
      std::ofstream f(tax_output, std::ios::binary);
      f << text;
      if (!f) {
        std::fprintf(stderr, "error: cannot write %s\n", tax_output.c_str());
        return 1;
      }
    }
    return 0;
  }
  if (cfg->parsed()) {
    json config;
    try {
      config = config_o.build();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
    char* out = nullptr;
    return emit(cf_config_resolve(config.dump().c_str(), &out), out);
  }
  return 1;
}
