#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/model.hpp"
#include "cardforge/prompts.hpp"

namespace cardforge {

inline constexpr double kDistributionTolerance = 1e-9;

/// Throws invalid_argument unless `p` is finite, non-negative and sums to 1
/// within kDistributionTolerance.
void check_distribution(std::span<const double> p, const char* name);

/// Jensen-Shannon divergence with base-2 logarithms (in [0, 1]); 0 log 0 = 0.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// 1 - sqrt(JSD). With raw_divergence, 1 - JSD instead.
double js_similarity(std::span<const double> p, std::span<const double> q, bool raw_divergence = false);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

struct OpinionItem {
  std::string question;
  std::vector<std::string> options;
  std::map<std::string, std::vector<double>> gold;  // culture code -> distribution
};

struct BinaryGroup {
  std::string group_id;
  std::array<std::string, 4> questions;
  std::array<bool, 4> golds{};
};

struct OpenItem {
  std::string question;
  std::string culture;
  std::string rubric;
  std::optional<std::string> response;  // pre-recorded answer; generated when absent
};

std::vector<OpinionItem> parse_opinion_items(std::string_view jsonl, const std::string& origin);
std::vector<BinaryGroup> parse_binary_groups(std::string_view jsonl, const std::string& origin);
std::vector<OpenItem> parse_open_items(std::string_view jsonl, const std::string& origin);

struct OpinionItemResult {
  std::size_t index = 0;
  std::string status;  // "scored", "no_gold", "model_failure", "option_mismatch"
  std::optional<double> similarity;
  std::vector<double> distribution;
};

struct OpinionScore {
  double mean = 0.0;
  std::size_t scored = 0;
  std::vector<OpinionItemResult> items;
};

/// Mean js_similarity between the softmax of the model's option scores and
/// the culture's gold distribution. Items without gold for the culture or
/// without usable scores are reported and left out of the mean.
OpinionScore score_opinion_set(ModelUnderTest& model, const std::vector<OpinionItem>& items,
                               const std::string& culture, bool raw_divergence = false);

/// First of true/false/yes/no (case-insensitive, whole word) in the text.
std::optional<bool> parse_true_false(std::string_view text);

struct BinaryGroupResult {
  std::string group_id;
  std::array<std::optional<bool>, 4> answers;
  int correct = 0;
  int score = 0;  // 1 only when all four match
};

struct BinaryScore {
  double accuracy = 0.0;
  double per_question_accuracy = 0.0;
  std::size_t unparseable = 0;
  std::vector<BinaryGroupResult> groups;
};

BinaryScore score_binary_hard(ModelUnderTest& model, const std::vector<BinaryGroup>& groups, const PromptSet& prompts);

/// Integer from a "SCORE: n" line when 1 <= n <= 5.
std::optional<int> parse_judge_score(std::string_view output);

struct JudgeItemResult {
  std::size_t index = 0;
  std::string status;  // "scored", "repaired", "excluded"
  std::optional<int> score;
};

struct JudgeScore {
  double mean = 0.0;
  std::size_t scored = 0;
  std::vector<JudgeItemResult> items;
};

/// One rubric prompt per item; an unusable reply gets one repair prompt and
/// the item is excluded if that fails too.
JudgeScore judge_open_responses(Gateway& gateway, const ProviderSettings& judge, const PromptSet& prompts,
                                const std::vector<OpenItem>& items, const std::vector<std::string>& responses,
                                const std::vector<Culture>& roster, int max_in_flight);

enum class Suite { opinion, binary, open };

struct EvalOptions {
  std::set<Suite> suites{Suite::opinion, Suite::binary, Suite::open};
  std::string data_dir;  // empty: <run_dir>/eval
  std::string culture;   // opinion gold column; empty: first roster culture
  bool raw_divergence = false;
  std::optional<ProviderSettings> model;  // empty: config.eval_model
  std::optional<ProviderSettings> judge;  // empty: config.judge
  std::string report_path;                // empty: <run_dir>/eval_report.json
};

inline constexpr const char* kEvalLedger = "errors.evaluate.jsonl";

ordered_json run_evaluation(const RunConfig& config, Gateway& gateway, const PromptSet& prompts,
                            const EvalOptions& options);

}  // namespace cardforge
