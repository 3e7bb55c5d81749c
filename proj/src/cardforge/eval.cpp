#include "cardforge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "cardforge/fileio.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/synthesis.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

namespace fs = std::filesystem;

void check_distribution(std::span<const double> p, const char* name) {
  if (p.empty()) throw Error(ErrorKind::invalid_argument, std::string(name) + " is empty", name);
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::invalid_argument, std::string(name) + " has a negative or non-finite entry", name);
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw Error(ErrorKind::invalid_argument, std::string(name) + " does not sum to 1", name);
  }
}

namespace {

double kl_to_mixture(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double m = (p[i] + q[i]) / 2.0;
    s += p[i] * std::log2(p[i] / m);
  }
  return s;
}

}  // namespace

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorKind::invalid_argument, "distributions differ in length");
  check_distribution(p, "p");
  check_distribution(q, "q");
  const double jsd = 0.5 * (kl_to_mixture(p, q) + kl_to_mixture(q, p));
  return std::clamp(jsd, 0.0, 1.0);
}

double js_similarity(std::span<const double> p, std::span<const double> q, bool raw_divergence) {
  const double jsd = js_divergence(p, q);
  return raw_divergence ? 1.0 - jsd : 1.0 - std::sqrt(jsd);
}

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::invalid_argument, "softmax of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

template <class T, class Decode>
std::vector<T> parse_lines(std::string_view jsonl, const std::string& origin, Decode decode) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(decode(fields::parse_object(line)));
    } catch (const FieldError& e) {
      throw Error(ErrorKind::schema, origin + ":" + std::to_string(line_no) + ": " + e.what(), e.field());
    }
  }
  return out;
}

}  // namespace

std::vector<OpinionItem> parse_opinion_items(std::string_view jsonl, const std::string& origin) {
  return parse_lines<OpinionItem>(jsonl, origin, [](const nlohmann::json& j) {
    OpinionItem item;
    item.question = fields::get_string(j, "question");
    item.options = fields::get_string_array(j, "options");
    fields::invariant(item.options.size() >= 2, "options", "an opinion item needs at least two options");
    const auto& gold = fields::require(j, "gold");
    if (!gold.is_object()) throw FieldError(ValidationErrorKind::wrong_type, "gold", "gold must map culture codes to distributions");
    for (auto it = gold.begin(); it != gold.end(); ++it) {
      if (!it->is_array()) throw FieldError(ValidationErrorKind::wrong_type, "gold", "gold entries must be arrays");
      std::vector<double> dist;
      for (const auto& v : *it) {
        if (!v.is_number()) throw FieldError(ValidationErrorKind::wrong_type, "gold", "gold entries must be numbers");
        dist.push_back(v.get<double>());
      }
      fields::invariant(dist.size() == item.options.size(), "gold", "gold length differs from the option count");
      double sum = 0.0;
      bool nonneg = true;
      for (double v : dist) {
        sum += v;
        nonneg &= v >= 0.0 && std::isfinite(v);
      }
      fields::invariant(nonneg && std::abs(sum - 1.0) <= kDistributionTolerance, "gold",
                        "gold for " + it.key() + " is not a probability distribution");
      item.gold[it.key()] = std::move(dist);
    }
    return item;
  });
}

std::vector<BinaryGroup> parse_binary_groups(std::string_view jsonl, const std::string& origin) {
  return parse_lines<BinaryGroup>(jsonl, origin, [](const nlohmann::json& j) {
    BinaryGroup g;
    g.group_id = fields::get_string(j, "group_id");
    auto qs = fields::get_string_array(j, "questions");
    fields::invariant(qs.size() == 4, "questions", "a binary group has exactly four questions");
    const auto& golds = fields::require(j, "golds");
    if (!golds.is_array() || golds.size() != 4) {
      throw FieldError(ValidationErrorKind::invariant_violation, "golds", "a binary group has exactly four golds");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (!golds[i].is_boolean()) throw FieldError(ValidationErrorKind::wrong_type, "golds", "golds must be booleans");
      g.questions[i] = qs[i];
      g.golds[i] = golds[i].get<bool>();
    }
    return g;
  });
}

std::vector<OpenItem> parse_open_items(std::string_view jsonl, const std::string& origin) {
  return parse_lines<OpenItem>(jsonl, origin, [](const nlohmann::json& j) {
    OpenItem item;
    item.question = fields::get_string(j, "question");
    item.culture = fields::get_string(j, "culture");
    item.rubric = fields::get_string(j, "rubric");
    fields::invariant(!text::trim(item.rubric).empty(), "rubric", "rubric must be non-empty");
    item.response = fields::get_optional_string(j, "response");
    return item;
  });
}

OpinionScore score_opinion_set(ModelUnderTest& model, const std::vector<OpinionItem>& items,
                               const std::string& culture, bool raw_divergence) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "opinion item list is empty");
  if (!model.capabilities().option_scoring) {
    throw Error(ErrorKind::precondition, "model " + model.id() + " cannot score options");
  }
  std::vector<OptionQuery> queries;
  std::vector<std::size_t> asked;
  OpinionScore out;
  out.items.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.items[i].index = i;
    if (!items[i].gold.count(culture)) {
      out.items[i].status = "no_gold";
      continue;
    }
    queries.push_back({items[i].question, items[i].options});
    asked.push_back(i);
  }
  auto scores = queries.empty() ? std::vector<std::optional<std::vector<double>>>{} : model.score_options(queries);
  double sum = 0.0;
  for (std::size_t k = 0; k < asked.size(); ++k) {
    auto& res = out.items[asked[k]];
    const auto& item = items[asked[k]];
    if (!scores[k]) {
      res.status = "model_failure";
      continue;
    }
    if (scores[k]->size() != item.options.size()) {
      res.status = "option_mismatch";
      continue;
    }
    res.distribution = softmax(*scores[k]);
    res.similarity = js_similarity(res.distribution, item.gold.at(culture), raw_divergence);
    res.status = "scored";
    sum += *res.similarity;
    ++out.scored;
  }
  if (out.scored == 0) {
    throw Error(ErrorKind::precondition, "no opinion item could be scored for culture " + culture);
  }
  out.mean = sum / static_cast<double>(out.scored);
  return out;
}

std::optional<bool> parse_true_false(std::string_view input) {
  std::string word;
  auto check = [&]() -> std::optional<bool> {
    if (word == "true" || word == "yes") return true;
    if (word == "false" || word == "no") return false;
    return std::nullopt;
  };
  for (char ch : input) {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      continue;
    }
    if (auto v = check()) return v;
    word.clear();
  }
  return check();
}

BinaryScore score_binary_hard(ModelUnderTest& model, const std::vector<BinaryGroup>& groups, const PromptSet& prompts) {
  if (groups.empty()) throw Error(ErrorKind::invalid_argument, "binary group list is empty");
  if (!model.capabilities().free_text) throw Error(ErrorKind::precondition, "model " + model.id() + " cannot answer in text");
  std::vector<std::string> user_prompts;
  for (const auto& g : groups) {
    for (const auto& q : g.questions) user_prompts.push_back(prompts.render("binary.user", {{"question", q}}));
  }
  auto replies = model.generate(user_prompts);
  BinaryScore out;
  std::size_t correct_questions = 0;
  std::size_t full_groups = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    BinaryGroupResult res;
    res.group_id = groups[gi].group_id;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& reply = replies[gi * 4 + k];
      if (reply) res.answers[k] = parse_true_false(*reply);
      if (!res.answers[k]) {
        ++out.unparseable;
        log().warn("binary group {} question {}: no usable true/false answer", res.group_id, k);
        continue;
      }
      if (*res.answers[k] == groups[gi].golds[k]) ++res.correct;
    }
    res.score = res.correct == 4 ? 1 : 0;
    correct_questions += static_cast<std::size_t>(res.correct);
    full_groups += static_cast<std::size_t>(res.score);
    out.groups.push_back(std::move(res));
  }
  out.accuracy = static_cast<double>(full_groups) / static_cast<double>(groups.size());
  out.per_question_accuracy = static_cast<double>(correct_questions) / static_cast<double>(groups.size() * 4);
  return out;
}

std::optional<int> parse_judge_score(std::string_view output) {
  for (const auto& raw : text::split_lines(output)) {
    std::string line = text::trim(raw);
    if (!text::istarts_with(line, "SCORE:")) continue;
    std::string rest = text::trim(line.substr(6));
    if (rest.empty() || !std::isdigit(static_cast<unsigned char>(rest[0]))) return std::nullopt;
    if (rest.size() > 1 && std::isdigit(static_cast<unsigned char>(rest[1]))) return std::nullopt;
    int v = rest[0] - '0';
    if (v < 1 || v > 5) return std::nullopt;
    return v;
  }
  return std::nullopt;
}

JudgeScore judge_open_responses(Gateway& gateway, const ProviderSettings& judge, const PromptSet& prompts,
                                const std::vector<OpenItem>& items, const std::vector<std::string>& responses,
                                const std::vector<Culture>& roster, int max_in_flight) {
  if (items.empty()) throw Error(ErrorKind::invalid_argument, "open item list is empty");
  if (responses.size() != items.size()) {
    throw Error(ErrorKind::invalid_argument, "expected one response per open item");
  }
  auto culture_name = [&](const std::string& code) {
    for (const auto& c : roster) {
      if (c.code == code) return c.display_name;
    }
    return known_culture_name(code);
  };
  auto make = [&](std::string user) {
    CompletionRequest r;
    r.provider_id = judge.provider;
    r.model_id = judge.model;
    r.system_prompt = prompts.render("judge.system", {});
    r.user_prompt = std::move(user);
    r.sampling.temperature = judge.temperature;
    r.sampling.max_tokens = judge.max_tokens;
    return r;
  };
  std::vector<CompletionRequest> first;
  for (std::size_t i = 0; i < items.size(); ++i) {
    first.push_back(make(prompts.render("judge.user", {{"response_sha", sha256_hex(responses[i])},
                                                       {"culture_name", culture_name(items[i].culture)},
                                                       {"question", items[i].question},
                                                       {"response", responses[i]},
                                                       {"rubric", items[i].rubric}})));
  }
  auto outcomes = gateway.complete_batch(first, max_in_flight);
  JudgeScore out;
  out.items.resize(items.size());
  std::vector<CompletionRequest> repairs;
  std::vector<std::size_t> repaired;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.items[i].index = i;
    std::string previous = outcomes[i].ok() ? outcomes[i].result->text : std::string();
    if (outcomes[i].ok()) out.items[i].score = parse_judge_score(previous);
    if (out.items[i].score) {
      out.items[i].status = "scored";
      continue;
    }
    repairs.push_back(make(prompts.render("judge_repair.user", {{"response_sha", sha256_hex(responses[i])},
                                                                 {"previous_output", previous}})));
    repaired.push_back(i);
  }
  if (!repairs.empty()) {
    auto again = gateway.complete_batch(repairs, max_in_flight);
    for (std::size_t k = 0; k < repaired.size(); ++k) {
      auto& res = out.items[repaired[k]];
      if (again[k].ok()) res.score = parse_judge_score(again[k].result->text);
      res.status = res.score ? "repaired" : "excluded";
      if (!res.score) log().warn("open item {}: judge reply unusable after repair; excluded", repaired[k]);
    }
  }
  double sum = 0.0;
  for (const auto& r : out.items) {
    if (!r.score) continue;
    sum += *r.score;
    ++out.scored;
  }
  if (out.scored == 0) throw Error(ErrorKind::provider_malformed, "judge produced no usable score");
  out.mean = sum / static_cast<double>(out.scored);
  return out;
}

namespace {

std::string require_file(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) throw Error(ErrorKind::config, "missing evaluation input " + p.string(), name);
  return p.string();
}

}  // namespace

ordered_json run_evaluation(const RunConfig& config, Gateway& gateway, const PromptSet& prompts,
                            const EvalOptions& options) {
  const fs::path run_dir = config.run_dir;
  const fs::path data_dir = options.data_dir.empty() ? run_dir / "eval" : fs::path(options.data_dir);
  const ProviderSettings model_settings = options.model.value_or(config.eval_model);
  const ProviderSettings judge_settings = options.judge.value_or(config.judge);
  const std::string culture = options.culture.empty() ? config.cultures.front().code : options.culture;
  GatewayModel model(gateway, model_settings, prompts, config.max_in_flight);
  std::vector<std::string> ledger;
  auto note = [&](const std::string& suite, const std::string& item, const std::string& kind, const std::string& msg) {
    ledger.push_back(canonical_dump(to_json(LedgerEntry{"evaluate." + suite, item, culture, "warning", kind, msg})));
  };

  ordered_json report;
  report["model"] = model.id();
  ordered_json suites = ordered_json::object();

  if (options.suites.count(Suite::opinion)) {
    auto path = require_file(data_dir, "opinion.jsonl");
    auto items = parse_opinion_items(fileio::read_file(path), path);
    auto score = score_opinion_set(model, items, culture, options.raw_divergence);
    ordered_json s;
    s["culture"] = culture;
    s["metric"] = options.raw_divergence ? "1 - jsd" : "1 - sqrt(jsd)";
    s["score"] = score.mean;
    s["scored"] = score.scored;
    ordered_json arr = ordered_json::array();
    for (const auto& r : score.items) {
      ordered_json e;
      e["index"] = r.index;
      e["status"] = r.status;
      e["similarity"] = r.similarity ? ordered_json(*r.similarity) : ordered_json(nullptr);
      e["distribution"] = r.distribution;
      arr.push_back(e);
      if (r.status != "scored") note("opinion", std::to_string(r.index), r.status, "item left out of the mean");
    }
    s["items"] = arr;
    suites["opinion"] = s;
  }

  if (options.suites.count(Suite::binary)) {
    auto path = require_file(data_dir, "binary_groups.jsonl");
    auto groups = parse_binary_groups(fileio::read_file(path), path);
    auto score = score_binary_hard(model, groups, prompts);
    ordered_json s;
    s["accuracy"] = score.accuracy;
    s["per_question_accuracy"] = score.per_question_accuracy;
    s["unparseable"] = score.unparseable;
    ordered_json arr = ordered_json::array();
    for (const auto& g : score.groups) {
      ordered_json e;
      e["group_id"] = g.group_id;
      ordered_json answers = ordered_json::array();
      for (const auto& a : g.answers) answers.push_back(a ? ordered_json(*a) : ordered_json(nullptr));
      e["answers"] = answers;
      e["correct"] = g.correct;
      e["score"] = g.score;
      arr.push_back(e);
      for (std::size_t k = 0; k < 4; ++k) {
        if (!g.answers[k]) note("binary", g.group_id + "#" + std::to_string(k), "unparseable", "answer counted as wrong");
      }
    }
    s["groups"] = arr;
    suites["binary"] = s;
  }

  if (options.suites.count(Suite::open)) {
    auto path = require_file(data_dir, "open_items.jsonl");
    auto items = parse_open_items(fileio::read_file(path), path);
    std::vector<std::string> responses(items.size());
    std::vector<std::string> prompts_needed;
    std::vector<std::size_t> needed;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].response) {
        responses[i] = *items[i].response;
      } else {
        prompts_needed.push_back(prompts.render("open_answer.user", {{"question", items[i].question}}));
        needed.push_back(i);
      }
    }
    if (!needed.empty()) {
      auto replies = model.generate(prompts_needed);
      for (std::size_t k = 0; k < needed.size(); ++k) {
        if (!replies[k]) {
          note("open", std::to_string(needed[k]), "model_failure", "no answer; judged as empty");
          continue;
        }
        try {
          responses[needed[k]] = parse_response_text(*replies[k]);
        } catch (const Error&) {
          note("open", std::to_string(needed[k]), "empty_answer", "empty answer");
        }
      }
    }
    auto score = judge_open_responses(gateway, judge_settings, prompts, items, responses, config.cultures,
                                      config.max_in_flight);
    ordered_json s;
    s["judge"] = judge_settings.provider + ":" + judge_settings.model;
    s["mean"] = score.mean;
    s["scored"] = score.scored;
    ordered_json arr = ordered_json::array();
    for (const auto& r : score.items) {
      ordered_json e;
      e["index"] = r.index;
      e["status"] = r.status;
      e["score"] = r.score ? ordered_json(*r.score) : ordered_json(nullptr);
      e["response_sha"] = sha256_hex(responses[r.index]);
      arr.push_back(e);
      if (!r.score) note("open", std::to_string(r.index), "excluded", "judge reply unusable after repair");
    }
    s["items"] = arr;
    suites["open"] = s;
  }

  report["suites"] = suites;
  fileio::ensure_directory(run_dir);
  const fs::path report_path = options.report_path.empty() ? run_dir / "eval_report.json" : fs::path(options.report_path);
  fileio::write_file_atomic(report_path, report.dump(2) + "\n");
  fileio::write_file_atomic(run_dir / kEvalLedger, fileio::jsonl_content(ledger));
  return report;
}

}  // namespace cardforge
