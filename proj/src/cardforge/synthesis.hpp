#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/prompts.hpp"
#include "cardforge/records.hpp"
#include "cardforge/taxonomy.hpp"

namespace cardforge {

struct SynthesisContext {
  const RunConfig& config;
  Gateway& gateway;
  const PromptSet& prompts;
};

// One entry of a command's error ledger (errors.<command>.jsonl).
struct LedgerEntry {
  std::string stage;
  std::string item;
  std::string culture;
  std::string severity;  // "error" or "warning"
  std::string kind;
  std::string message;
};

ordered_json to_json(const LedgerEntry& e);

struct QuestionBatch {
  std::vector<QuestionRecord> questions;
  std::optional<std::string> warning;  // set when refills could not reach k
  int rounds = 0;
  int duplicates = 0;
};

/// Universal questions for one topic. Duplicates (normalized text) are
/// dropped and the shortfall is requested again, up to refill_rounds extra
/// rounds. A reply with no parseable line gets one repair prompt.
QuestionBatch generate_questions(const CulturalTopic& topic, int k, const SynthesisContext& ctx);

struct ParsedQuestion {
  std::optional<QuestionType> qtype;  // nullopt when the line carries no tag
  std::string text;
};

/// Lines of the form "<n>. [<qtype>] <question>"; lines with an unknown tag
/// are dropped.
std::vector<ParsedQuestion> parse_question_list(std::string_view output);

/// Text after the "RESPONSE:" marker, or the whole reply when the marker is
/// absent. Empty replies are a provider_malformed error.
std::string parse_response_text(std::string_view output);

CompletionRequest isolated_request(const QuestionRecord& question, const Culture& culture,
                                   const SynthesisContext& ctx);

struct IsolatedResult {
  std::vector<ResponseRecord> responses;          // successful cultures, roster order
  std::vector<std::optional<Error>> errors;       // positional over `cultures`
};

IsolatedResult elicit_isolated_responses(const QuestionRecord& question, const std::vector<Culture>& cultures,
                                         const SynthesisContext& ctx);

struct ParsedAdaptation {
  std::map<std::string, std::string> characteristics;
  std::string reasoning;
  std::optional<std::string> final_question;
};

ParsedAdaptation parse_adaptation(std::string_view output);

struct AdaptationTrace {
  std::string universal_question_id;
  std::map<std::string, std::string> per_culture_characteristics;
  std::map<std::string, QuestionRecord> refined_questions;
  std::string raw_reasoning;
  std::vector<std::string> unadapted;  // targets whose refined text equals the universal text
};

ordered_json to_json(const AdaptationTrace& t);

/// One chain-of-thought prompt per roster culture, each showing every
/// culture's isolated answer. Throws the first per-target failure.
AdaptationTrace adapt_question(const QuestionRecord& universal, const std::vector<ResponseRecord>& isolated,
                               const SynthesisContext& ctx);

ResponseRecord generate_contrastive_response(const QuestionRecord& adapted, const Culture& target,
                                             const std::vector<ResponseRecord>& peer_responses,
                                             const SynthesisContext& ctx);

/// Topics in scope for a run: the taxonomy filtered by `topics` and
/// truncated to `max_topics`.
std::vector<CulturalTopic> topics_in_scope(const Taxonomy& taxonomy, const RunConfig& config);

struct SynthesisSummary {
  std::size_t topics = 0;
  std::size_t universal_questions = 0;
  std::size_t isolated_responses = 0;
  std::size_t adapted_questions = 0;
  std::size_t contrastive_responses = 0;
  std::size_t failures = 0;
  std::size_t warnings = 0;
  std::size_t cached_stages = 0;
  std::size_t total_stages = 0;
  bool all_cached() const { return cached_stages == total_stages; }
};

ordered_json to_json(const SynthesisSummary& s);

inline constexpr const char* kSynthesisLedger = "errors.synthesize.jsonl";

/// Runs every synthesis stage into config.run_dir, skipping stages whose
/// manifest entry is still fresh.
SynthesisSummary run_synthesis(const RunConfig& config, Gateway& gateway, const PromptSet& prompts);

}  // namespace cardforge
