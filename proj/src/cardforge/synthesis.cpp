#include "cardforge/synthesis.hpp"

#include <atomic>
#include <regex>
#include <set>

#include "cardforge/fileio.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/manifest.hpp"
#include "cardforge/parallel.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

namespace fs = std::filesystem;

namespace {

std::int64_t sampling_seed(std::uint64_t seed, std::string_view a, std::string_view b) {
  return static_cast<std::int64_t>(derive_seed(seed, a, b) >> 1);
}

CompletionRequest make_request(const ProviderSettings& p, double temperature, std::string system,
                               std::string user, std::int64_t seed) {
  CompletionRequest r;
  r.provider_id = p.provider;
  r.model_id = p.model;
  r.system_prompt = std::move(system);
  r.user_prompt = std::move(user);
  r.sampling.temperature = temperature;
  r.sampling.max_tokens = p.max_tokens;
  r.sampling.seed = seed;
  return r;
}

const Culture& culture_by_code(const RunConfig& config, const std::string& code) {
  for (const auto& c : config.cultures) {
    if (c.code == code) return c;
  }
  throw Error(ErrorKind::invalid_argument, "culture " + code + " is not in the roster", "culture");
}

// Runs fn(i) for every item under the in-flight bound. Library errors are
// captured per item; with fail_fast the first one stops dispatch of the rest.
template <class Fn>
std::vector<std::optional<Error>> run_items(std::size_t n, const RunConfig& config, Fn&& fn) {
  std::vector<std::optional<Error>> errors(n);
  std::atomic<bool> stop{false};
  parallel_for(n, config.max_in_flight, [&](std::size_t i) {
    if (stop.load()) return;
    try {
      fn(i);
    } catch (const Error& e) {
      errors[i] = e;
      if (config.fail_fast) stop = true;
    }
  });
  return errors;
}

std::string peer_block(const std::vector<ResponseRecord>& responses, const RunConfig& config) {
  std::string out;
  for (const auto& r : responses) {
    out += "- " + r.culture + " (" + culture_by_code(config, r.culture).display_name + "): " + r.text + "\n";
  }
  return out;
}

ordered_json synthesis_settings(const RunConfig& c) {
  ordered_json j = to_json(c);
  ordered_json out;
  for (const char* key : {"cultures", "taxonomy", "strict_count", "topics", "max_topics", "k_questions_per_topic",
                          "qtype_cycle", "refill_rounds", "adapt_temperature", "contrastive_peers", "peer_material",
                          "generation", "seed"}) {
    out[key] = j[key];
  }
  return out;
}

class Ledger {
 public:
  void add(LedgerEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  void write(const fs::path& path) const {
    std::vector<std::string> lines;
    for (const auto& e : entries_) lines.push_back(canonical_dump(to_json(e)));
    fileio::write_file_atomic(path, fileio::jsonl_content(lines));
  }

 private:
  std::vector<LedgerEntry> entries_;
};

}  // namespace

ordered_json to_json(const LedgerEntry& e) {
  ordered_json j;
  j["stage"] = e.stage;
  j["item"] = e.item;
  j["culture"] = e.culture;
  j["severity"] = e.severity;
  j["kind"] = e.kind;
  j["message"] = e.message;
  return j;
}

std::vector<ParsedQuestion> parse_question_list(std::string_view output) {
  static const std::regex line_re(R"(^\s*\d+\s*[.)]\s*(?:\[([A-Za-z_ -]+)\]\s*)?(.*\S)\s*$)");
  std::vector<ParsedQuestion> out;
  for (const auto& line : text::split_lines(output)) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    ParsedQuestion q;
    if (m[1].matched) {
      std::string tag = text::to_lower_ascii(text::trim(m[1].str()));
      for (auto& ch : tag) {
        if (ch == ' ' || ch == '-') ch = '_';
      }
      q.qtype = parse_question_type(tag);
      if (!q.qtype) continue;
    }
    q.text = text::sanitize_utf8(text::trim(m[2].str()));
    if (q.text.empty()) continue;
    out.push_back(std::move(q));
  }
  return out;
}

std::string parse_response_text(std::string_view output) {
  std::string body(output);
  if (auto pos = body.find("RESPONSE:"); pos != std::string::npos) body = body.substr(pos + 9);
  body = text::trim(body);
  if (body.empty()) throw Error(ErrorKind::provider_malformed, "provider returned an empty response");
  return text::sanitize_utf8(body);
}

QuestionBatch generate_questions(const CulturalTopic& topic, int k, const SynthesisContext& ctx) {
  if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be positive", "k");
  const RunConfig& config = ctx.config;
  const auto& cycle = config.qtype_cycle;
  QuestionBatch out;
  std::set<std::string> seen;
  const std::string system = ctx.prompts.render("questions.system", {});

  for (int round = 0; round <= config.refill_rounds && static_cast<int>(out.questions.size()) < k; ++round) {
    const std::size_t have = out.questions.size();
    const int need = k - static_cast<int>(have);
    std::string plan;
    for (int i = 0; i < need; ++i) {
      plan += std::to_string(i + 1) + ". " + std::string(to_string(cycle[(have + i) % cycle.size()])) + "\n";
    }
    std::string avoid;
    if (have > 0) {
      avoid = "\nThese questions already exist; do not repeat them:\n";
      for (const auto& q : out.questions) avoid += "- " + q.text + "\n";
    }
    TemplateVars vars{{"k", std::to_string(need)},
                      {"round", std::to_string(round)},
                      {"topic_name", topic.name},
                      {"topic_level", std::string(to_string(topic.level))},
                      {"topic_description", topic.description},
                      {"type_plan", plan},
                      {"avoid_block", avoid}};
    const std::string user = ctx.prompts.render("questions.user", vars);
    const std::string seed_label = topic.topic_id + "#" + std::to_string(round);
    auto result = ctx.gateway.complete(make_request(config.generation, config.generation.temperature, system, user,
                                                    sampling_seed(config.seed, "questions", seed_label)));
    auto parsed = parse_question_list(result.text);
    if (parsed.empty()) {
      const std::string repair = ctx.prompts.render("questions_repair.user", {{"k", std::to_string(need)},
                                                                              {"round", std::to_string(round)},
                                                                              {"original_prompt", user},
                                                                              {"previous_output", result.text}});
      auto again = ctx.gateway.complete(make_request(config.generation, config.generation.temperature, system,
                                                     repair, sampling_seed(config.seed, "questions-repair", seed_label)));
      parsed = parse_question_list(again.text);
      if (parsed.empty()) {
        throw Error(ErrorKind::provider_malformed,
                    "topic " + topic.topic_id + ": question list unparseable after repair prompt");
      }
    }
    out.rounds = round + 1;
    for (const auto& p : parsed) {
      if (static_cast<int>(out.questions.size()) >= k) break;
      if (!seen.insert(text::normalize_for_dedup(p.text)).second) {
        ++out.duplicates;
        continue;
      }
      QuestionType qtype = p.qtype ? *p.qtype : cycle[out.questions.size() % cycle.size()];
      out.questions.push_back(QuestionRecord::make_universal(topic.topic_id, qtype, p.text));
    }
  }
  if (static_cast<int>(out.questions.size()) < k) {
    out.warning = "topic " + topic.topic_id + ": " + std::to_string(out.questions.size()) + " of " +
                  std::to_string(k) + " unique questions after " + std::to_string(config.refill_rounds) +
                  " refill rounds";
  }
  return out;
}

CompletionRequest isolated_request(const QuestionRecord& question, const Culture& culture,
                                   const SynthesisContext& ctx) {
  const RunConfig& config = ctx.config;
  return make_request(config.generation, config.generation.temperature,
                      ctx.prompts.render("response.system", {{"culture_name", culture.display_name}}),
                      ctx.prompts.render("response.user", {{"culture_code", culture.code}, {"question", question.text}}),
                      sampling_seed(config.seed, "isolated", question.id + "/" + culture.code));
}

IsolatedResult elicit_isolated_responses(const QuestionRecord& question, const std::vector<Culture>& cultures,
                                         const SynthesisContext& ctx) {
  std::vector<std::optional<ResponseRecord>> slots(cultures.size());
  auto errors = run_items(cultures.size(), ctx.config, [&](std::size_t i) {
    auto result = ctx.gateway.complete(isolated_request(question, cultures[i], ctx));
    slots[i] = ResponseRecord{question.id, cultures[i].code, parse_response_text(result.text), ResponseStage::isolated, {}};
  });
  IsolatedResult out;
  for (auto& s : slots) {
    if (s) out.responses.push_back(std::move(*s));
  }
  out.errors = std::move(errors);
  return out;
}

ParsedAdaptation parse_adaptation(std::string_view output) {
  enum class Section { none, characteristics, reasoning };
  ParsedAdaptation out;
  Section section = Section::none;
  std::vector<std::string> reasoning;
  for (const auto& raw : text::split_lines(output)) {
    const std::string line = text::trim(raw);
    if (text::istarts_with(line, "FINAL QUESTION:")) {
      std::string q = text::trim(line.substr(15));
      if (!q.empty() && !out.final_question) out.final_question = text::sanitize_utf8(q);
      section = Section::none;
    } else if (text::istarts_with(line, "CHARACTERISTICS:")) {
      section = Section::characteristics;
    } else if (text::istarts_with(line, "REASONING:")) {
      section = Section::reasoning;
      std::string rest = text::trim(line.substr(10));
      if (!rest.empty()) reasoning.push_back(rest);
    } else if (section == Section::characteristics) {
      if (line.size() < 2 || line[0] != '-') continue;
      std::string entry = text::trim(line.substr(1));
      auto colon = entry.find(':');
      if (colon == std::string::npos) continue;
      std::string code = text::trim(entry.substr(0, colon));
      if (!code.empty()) out.characteristics[code] = text::sanitize_utf8(text::trim(entry.substr(colon + 1)));
    } else if (section == Section::reasoning && !line.empty()) {
      reasoning.push_back(line);
    }
  }
  out.reasoning = text::sanitize_utf8(text::join(reasoning, "\n"));
  return out;
}

namespace {

struct TargetAdaptation {
  QuestionRecord question;
  std::map<std::string, std::string> characteristics;
  std::string reasoning;
  bool unadapted = false;
};

TargetAdaptation adapt_for_target(const QuestionRecord& universal, const std::vector<ResponseRecord>& isolated,
                                  const Culture& target, const SynthesisContext& ctx) {
  const RunConfig& config = ctx.config;
  std::vector<std::string> codes;
  for (const auto& r : isolated) codes.push_back(r.culture);
  const std::string culture_codes = text::join(codes, ",");
  const std::string system = ctx.prompts.render("adapt.system", {});
  const std::string user = ctx.prompts.render("adapt.user", {{"culture_code", target.code},
                                                             {"culture_codes", culture_codes},
                                                             {"question", universal.text},
                                                             {"responses_block", peer_block(isolated, config)},
                                                             {"culture_name", target.display_name}});
  const std::string label = universal.id + "/" + target.code;
  auto result = ctx.gateway.complete(
      make_request(config.generation, config.adapt_temperature, system, user, sampling_seed(config.seed, "adapt", label)));
  ParsedAdaptation parsed = parse_adaptation(result.text);
  if (!parsed.final_question) {
    const std::string repair = ctx.prompts.render("adapt_repair.user", {{"culture_code", target.code},
                                                                        {"culture_codes", culture_codes},
                                                                        {"original_prompt", user},
                                                                        {"previous_output", result.text},
                                                                        {"culture_name", target.display_name}});
    auto again = ctx.gateway.complete(make_request(config.generation, config.adapt_temperature, system, repair,
                                                   sampling_seed(config.seed, "adapt-repair", label)));
    parsed = parse_adaptation(again.text);
    if (!parsed.final_question) {
      throw Error(ErrorKind::provider_malformed,
                  "adaptation of " + universal.id + " for " + target.code + ": no FINAL QUESTION after repair prompt");
    }
  }
  TargetAdaptation out{QuestionRecord::make_adapted(universal, target.code, *parsed.final_question),
                       parsed.characteristics, parsed.reasoning, false};
  out.unadapted = text::normalize_for_dedup(*parsed.final_question) == text::normalize_for_dedup(universal.text);
  return out;
}

AdaptationTrace assemble_trace(const QuestionRecord& universal, const std::vector<Culture>& roster,
                               const std::vector<TargetAdaptation>& parts) {
  AdaptationTrace trace;
  trace.universal_question_id = universal.id;
  std::vector<std::string> reasoning;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const std::string& code = roster[i].code;
    trace.refined_questions.emplace(code, parts[i].question);
    if (parts[i].unadapted) trace.unadapted.push_back(code);
    reasoning.push_back("[" + code + "]\n" + parts[i].reasoning);
    // A culture's characteristics come from the prompt targeting it, falling
    // back to the first other prompt that described it.
    std::string chars;
    if (auto it = parts[i].characteristics.find(code); it != parts[i].characteristics.end()) {
      chars = it->second;
    } else {
      for (const auto& p : parts) {
        if (auto jt = p.characteristics.find(code); jt != p.characteristics.end()) {
          chars = jt->second;
          break;
        }
      }
    }
    trace.per_culture_characteristics[code] = chars;
  }
  trace.raw_reasoning = text::join(reasoning, "\n");
  return trace;
}

void require_full_roster(const QuestionRecord& universal, const std::vector<ResponseRecord>& isolated,
                         const std::vector<Culture>& roster) {
  if (isolated.size() != roster.size()) {
    throw Error(ErrorKind::precondition, "adaptation of " + universal.id + " needs one isolated response per culture");
  }
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (isolated[i].culture != roster[i].code || isolated[i].question_id != universal.id) {
      throw Error(ErrorKind::precondition,
                  "adaptation of " + universal.id + " needs isolated responses in roster order");
    }
  }
}

}  // namespace

ordered_json to_json(const AdaptationTrace& t) {
  ordered_json j;
  j["universal_question_id"] = t.universal_question_id;
  ordered_json chars = ordered_json::object();
  for (const auto& [code, text] : t.per_culture_characteristics) chars[code] = text;
  j["per_culture_characteristics"] = chars;
  ordered_json refined = ordered_json::object();
  for (const auto& [code, q] : t.refined_questions) refined[code] = to_json(q);
  j["refined_questions"] = refined;
  j["raw_reasoning"] = t.raw_reasoning;
  j["unadapted"] = t.unadapted;
  return j;
}

AdaptationTrace adapt_question(const QuestionRecord& universal, const std::vector<ResponseRecord>& isolated,
                               const SynthesisContext& ctx) {
  const auto& roster = ctx.config.cultures;
  require_full_roster(universal, isolated, roster);
  std::vector<TargetAdaptation> parts(roster.size());
  auto errors = run_items(roster.size(), ctx.config,
                          [&](std::size_t i) { parts[i] = adapt_for_target(universal, isolated, roster[i], ctx); });
  for (auto& e : errors) {
    if (e) throw *e;
  }
  return assemble_trace(universal, roster, parts);
}

ResponseRecord generate_contrastive_response(const QuestionRecord& adapted, const Culture& target,
                                             const std::vector<ResponseRecord>& peer_responses,
                                             const SynthesisContext& ctx) {
  if (adapted.stage != QuestionStage::adapted) {
    throw Error(ErrorKind::precondition, "contrastive responses answer adapted questions", "stage");
  }
  if (peer_responses.empty()) {
    throw Error(ErrorKind::precondition, "contrastive response needs at least one peer response", "peer_cultures");
  }
  std::vector<std::string> peers;
  for (const auto& r : peer_responses) {
    if (r.culture == target.code) {
      throw Error(ErrorKind::precondition, "peer responses must come from other cultures", "peer_cultures");
    }
    peers.push_back(r.culture);
  }
  const RunConfig& config = ctx.config;
  auto result = ctx.gateway.complete(make_request(
      config.generation, config.generation.temperature,
      ctx.prompts.render("contrastive.system", {{"culture_name", target.display_name}}),
      ctx.prompts.render("contrastive.user", {{"culture_code", target.code},
                                              {"peer_codes", text::join(peers, ",")},
                                              {"question", adapted.text},
                                              {"peer_block", peer_block(peer_responses, config)},
                                              {"culture_name", target.display_name}}),
      sampling_seed(config.seed, "contrastive", adapted.id)));
  return {adapted.id, target.code, parse_response_text(result.text), ResponseStage::contrastive, peers};
}

std::vector<CulturalTopic> topics_in_scope(const Taxonomy& taxonomy, const RunConfig& config) {
  std::vector<CulturalTopic> out;
  if (config.topics.empty()) {
    out = taxonomy.topics();
  } else {
    for (const auto& id : config.topics) {
      const CulturalTopic* t = taxonomy.find(id);
      if (!t) throw Error(ErrorKind::config, "config 'topics': unknown topic id " + id, "topics");
      out.push_back(*t);
    }
  }
  if (config.max_topics > 0 && out.size() > static_cast<std::size_t>(config.max_topics)) {
    out.resize(static_cast<std::size_t>(config.max_topics));
  }
  return out;
}

ordered_json to_json(const SynthesisSummary& s) {
  ordered_json j;
  j["topics"] = s.topics;
  j["universal_questions"] = s.universal_questions;
  j["isolated_responses"] = s.isolated_responses;
  j["adapted_questions"] = s.adapted_questions;
  j["contrastive_responses"] = s.contrastive_responses;
  j["failures"] = s.failures;
  j["warnings"] = s.warnings;
  j["cached_stages"] = s.cached_stages;
  j["total_stages"] = s.total_stages;
  return j;
}

namespace {

// Shared bookkeeping for the stages of one synthesis run.
class StageRunner {
 public:
  StageRunner(const RunConfig& config, fs::path run_dir, RunManifest& manifest, Ledger& ledger,
              SynthesisSummary& summary)
      : config_(config), run_dir_(std::move(run_dir)), manifest_(manifest), ledger_(ledger), summary_(summary) {}

  // True when every listed output is fresh; counts as one stage.
  bool fresh(std::initializer_list<std::string> stages, const std::string& fingerprint) {
    ++summary_.total_stages;
    for (const auto& stage : stages) {
      if (!stage_is_fresh(manifest_, run_dir_, stage, fingerprint)) return false;
    }
    ++summary_.cached_stages;
    log().info("stage={} status=cached", *stages.begin());
    return true;
  }

  // Records per-item errors, writes the output and updates the manifest. A
  // stage with failures is written but left out of the manifest so the next
  // run retries the failed items.
  std::string finish(const std::string& stage, const std::string& file, const std::vector<std::string>& lines,
                     const std::string& fingerprint, const std::vector<std::optional<Error>>& errors,
                     const std::vector<std::pair<std::string, std::string>>& item_labels) {
    std::size_t failures = 0;
    const Error* first = nullptr;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i]) continue;
      ++failures;
      if (!first) first = &*errors[i];
      ledger_.add({stage, item_labels[i].first, item_labels[i].second, "error",
                   std::string(to_string(errors[i]->kind())), errors[i]->what()});
    }
    summary_.failures += failures;
    StageOutput out = write_stage_file(run_dir_, file, lines, fingerprint);
    if (failures == 0) {
      manifest_.stage_outputs[stage] = out;
    } else {
      manifest_.stage_outputs.erase(stage);
    }
    save_manifest(run_dir_, manifest_);
    log().info("stage={} records={} failures={}", stage, lines.size(), failures);
    if (failures > 0) {
      ledger_.write(run_dir_ / kSynthesisLedger);
      if (config_.fail_fast) throw *first;
      const double rate = static_cast<double>(failures) / static_cast<double>(errors.size());
      if (rate > config_.max_failure_rate) {
        throw Error(ErrorKind::provider_exhausted,
                    "stage " + stage + ": " + std::to_string(failures) + " of " + std::to_string(errors.size()) +
                        " items failed (threshold " + std::to_string(config_.max_failure_rate) + "); see " +
                        (run_dir_ / kSynthesisLedger).string());
      }
    }
    return out.sha256;
  }

  std::string recorded_sha(const std::string& stage) const { return manifest_.stage_outputs.at(stage).sha256; }

 private:
  const RunConfig& config_;
  fs::path run_dir_;
  RunManifest& manifest_;
  Ledger& ledger_;
  SynthesisSummary& summary_;
};

template <class T>
std::vector<std::string> lines_of(const std::vector<std::optional<T>>& slots) {
  std::vector<std::string> lines;
  for (const auto& s : slots) {
    if (s) lines.push_back(to_jsonl_line(*s));
  }
  return lines;
}

template <class T>
std::vector<T> values_of(std::vector<std::optional<T>>& slots) {
  std::vector<T> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace

SynthesisSummary run_synthesis(const RunConfig& config, Gateway& gateway, const PromptSet& prompts) {
  const fs::path run_dir = config.run_dir;
  fileio::ensure_directory(run_dir);
  const Taxonomy taxonomy = load_taxonomy(config.taxonomy, {config.strict_count});
  const auto topics = topics_in_scope(taxonomy, config);
  const auto& roster = config.cultures;
  SynthesisContext ctx{config, gateway, prompts};

  RunManifest manifest = load_manifest(run_dir);
  manifest.tool_version = CARDFORGE_VERSION;
  manifest.config_hash = config_hash(config);
  manifest.seed = config.seed;

  Ledger ledger;
  SynthesisSummary summary;
  summary.topics = topics.size();
  StageRunner runner(config, run_dir, manifest, ledger, summary);
  const std::string base = content_hash(ordered_json::array(
      {"synthesis", synthesis_settings(config), sha256_hex(taxonomy.to_jsonl()), prompts.digest()}));

  // Stage 1: universal questions per topic.
  std::vector<QuestionRecord> universal;
  const std::string fp_universal = content_hash(ordered_json::array({"questions.universal", base}));
  std::string sha_universal;
  if (runner.fresh({"questions.universal"}, fp_universal)) {
    universal = read_questions((run_dir / "questions.universal.jsonl").string());
    sha_universal = runner.recorded_sha("questions.universal");
  } else {
    std::vector<QuestionBatch> batches(topics.size());
    auto errors = run_items(topics.size(), config, [&](std::size_t i) {
      batches[i] = generate_questions(topics[i], config.k_questions_per_topic, ctx);
    });
    std::vector<std::pair<std::string, std::string>> labels;
    for (std::size_t i = 0; i < topics.size(); ++i) {
      labels.emplace_back(topics[i].topic_id, "");
      if (batches[i].warning) {
        ++summary.warnings;
        log().warn("stage=questions.universal {}", *batches[i].warning);
        ledger.add({"questions.universal", topics[i].topic_id, "", "warning", "refill_cap", *batches[i].warning});
      }
      for (auto& q : batches[i].questions) universal.push_back(std::move(q));
    }
    sha_universal = runner.finish("questions.universal", "questions.universal.jsonl", to_jsonl_lines(universal),
                                  fp_universal, errors, labels);
  }
  summary.universal_questions = universal.size();

  // Stage 2: isolated responses, one per (universal question, culture).
  std::vector<ResponseRecord> isolated;
  const std::string fp_isolated = content_hash(ordered_json::array({"responses.isolated", base, sha_universal}));
  std::string sha_isolated;
  if (runner.fresh({"responses.isolated"}, fp_isolated)) {
    isolated = read_responses((run_dir / "responses.isolated.jsonl").string());
    sha_isolated = runner.recorded_sha("responses.isolated");
  } else {
    const std::size_t n = universal.size() * roster.size();
    std::vector<std::optional<ResponseRecord>> slots(n);
    auto errors = run_items(n, config, [&](std::size_t i) {
      const auto& q = universal[i / roster.size()];
      const auto& c = roster[i % roster.size()];
      auto result = gateway.complete(isolated_request(q, c, ctx));
      slots[i] = ResponseRecord{q.id, c.code, parse_response_text(result.text), ResponseStage::isolated, {}};
    });
    std::vector<std::pair<std::string, std::string>> labels;
    for (std::size_t i = 0; i < n; ++i) labels.emplace_back(universal[i / roster.size()].id, roster[i % roster.size()].code);
    sha_isolated = runner.finish("responses.isolated", "responses.isolated.jsonl", lines_of(slots), fp_isolated,
                                 errors, labels);
    isolated = values_of(slots);
  }
  summary.isolated_responses = isolated.size();

  // Isolated responses grouped by question, roster order.
  std::map<std::string, std::vector<ResponseRecord>> isolated_by_question;
  for (const auto& r : isolated) isolated_by_question[r.question_id].push_back(r);

  // Stage 3: adapted questions (+ adaptation traces).
  std::vector<QuestionRecord> adapted;
  const std::string fp_adapted = content_hash(ordered_json::array({"questions.adapted", base, sha_isolated}));
  std::string sha_adapted;
  if (runner.fresh({"questions.adapted", "adaptation.traces"}, fp_adapted)) {
    adapted = read_questions((run_dir / "questions.adapted.jsonl").string());
    sha_adapted = runner.recorded_sha("questions.adapted");
  } else {
    const std::size_t n = universal.size() * roster.size();
    std::vector<std::optional<TargetAdaptation>> slots(n);
    auto errors = run_items(n, config, [&](std::size_t i) {
      const auto& q = universal[i / roster.size()];
      const auto& responses = isolated_by_question[q.id];
      require_full_roster(q, responses, roster);
      slots[i] = adapt_for_target(q, responses, roster[i % roster.size()], ctx);
    });
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::string> question_lines;
    std::vector<std::string> trace_lines;
    for (std::size_t qi = 0; qi < universal.size(); ++qi) {
      std::vector<TargetAdaptation> parts;
      for (std::size_t ci = 0; ci < roster.size(); ++ci) {
        const std::size_t i = qi * roster.size() + ci;
        labels.emplace_back(universal[qi].id, roster[ci].code);
        if (!slots[i]) continue;
        adapted.push_back(slots[i]->question);
        question_lines.push_back(to_jsonl_line(slots[i]->question));
        if (slots[i]->unadapted) {
          ++summary.warnings;
          ledger.add({"questions.adapted", slots[i]->question.id, roster[ci].code, "warning", "unadapted",
                      "refined question repeats the universal text"});
        }
        parts.push_back(*slots[i]);
      }
      if (parts.size() == roster.size()) {
        trace_lines.push_back(canonical_dump(to_json(assemble_trace(universal[qi], roster, parts))));
      }
    }
    bool ok = std::none_of(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); });
    StageOutput traces = write_stage_file(run_dir, "adaptation.traces.jsonl", trace_lines, fp_adapted);
    if (ok) {
      manifest.stage_outputs["adaptation.traces"] = traces;
    } else {
      manifest.stage_outputs.erase("adaptation.traces");
    }
    sha_adapted = runner.finish("questions.adapted", "questions.adapted.jsonl", question_lines, fp_adapted, errors,
                                labels);
  }
  summary.adapted_questions = adapted.size();

  // Optional stage: isolated answers of the other cultures to each adapted
  // question, used as peer material instead of the universal-question ones.
  std::map<std::string, std::vector<ResponseRecord>> adapted_isolated_by_question;
  std::string sha_peer_material = sha_isolated;
  if (config.peer_material == PeerMaterial::adapted_isolated) {
    const std::string fp = content_hash(ordered_json::array({"responses.adapted_isolated", base, sha_adapted}));
    std::vector<ResponseRecord> records;
    if (runner.fresh({"responses.adapted_isolated"}, fp)) {
      records = read_responses((run_dir / "responses.adapted_isolated.jsonl").string());
      sha_peer_material = runner.recorded_sha("responses.adapted_isolated");
    } else {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (adapted index, roster index)
      for (std::size_t a = 0; a < adapted.size(); ++a) {
        for (std::size_t c = 0; c < roster.size(); ++c) {
          if (roster[c].code != *adapted[a].adapted_for) pairs.emplace_back(a, c);
        }
      }
      std::vector<std::optional<ResponseRecord>> slots(pairs.size());
      auto errors = run_items(pairs.size(), config, [&](std::size_t i) {
        const auto& q = adapted[pairs[i].first];
        const auto& c = roster[pairs[i].second];
        auto result = gateway.complete(isolated_request(q, c, ctx));
        slots[i] = ResponseRecord{q.id, c.code, parse_response_text(result.text), ResponseStage::isolated, {}};
      });
      std::vector<std::pair<std::string, std::string>> labels;
      for (const auto& [a, c] : pairs) labels.emplace_back(adapted[a].id, roster[c].code);
      sha_peer_material = runner.finish("responses.adapted_isolated", "responses.adapted_isolated.jsonl",
                                        lines_of(slots), fp, errors, labels);
      records = values_of(slots);
    }
    for (const auto& r : records) adapted_isolated_by_question[r.question_id].push_back(r);
  }

  // Stage 4: contrastive responses, one per adapted question.
  const std::string fp_contrastive =
      content_hash(ordered_json::array({"responses.contrastive", base, sha_adapted, sha_peer_material}));
  if (runner.fresh({"responses.contrastive"}, fp_contrastive)) {
    summary.contrastive_responses = read_responses((run_dir / "responses.contrastive.jsonl").string()).size();
  } else {
    std::vector<std::optional<ResponseRecord>> slots(adapted.size());
    auto errors = run_items(adapted.size(), config, [&](std::size_t i) {
      const auto& q = adapted[i];
      const std::string& target = *q.adapted_for;
      const auto& source = config.peer_material == PeerMaterial::adapted_isolated
                               ? adapted_isolated_by_question[q.id]
                               : isolated_by_question[*q.parent_id];
      std::vector<ResponseRecord> material;
      for (const auto& r : source) {
        if (r.culture != target) material.push_back(r);
      }
      if (config.contrastive_peers > 0 && material.size() > static_cast<std::size_t>(config.contrastive_peers)) {
        Rng rng(derive_seed(config.seed, "contrastive-peers", q.id));
        auto picks = sample_indices(material.size(), static_cast<std::size_t>(config.contrastive_peers), rng);
        std::sort(picks.begin(), picks.end());
        std::vector<ResponseRecord> chosen;
        for (auto p : picks) chosen.push_back(material[p]);
        material = std::move(chosen);
      }
      slots[i] = generate_contrastive_response(q, culture_by_code(config, target), material, ctx);
    });
    std::vector<std::pair<std::string, std::string>> labels;
    for (const auto& q : adapted) labels.emplace_back(q.id, *q.adapted_for);
    runner.finish("responses.contrastive", "responses.contrastive.jsonl", lines_of(slots), fp_contrastive, errors,
                  labels);
    summary.contrastive_responses = values_of(slots).size();
  }

  ledger.write(run_dir / kSynthesisLedger);
  if (summary.all_cached()) log().info("all stages cached");
  return summary;
}

}  // namespace cardforge
