#include "cardforge/model.hpp"

#include <cctype>
#include <charconv>

#include "cardforge/text.hpp"

namespace cardforge {

std::optional<std::vector<double>> parse_option_scores(std::string_view output, std::size_t count) {
  for (const auto& raw : text::split_lines(output)) {
    std::string line = text::trim(raw);
    if (!text::istarts_with(line, "SCORES:")) continue;
    std::vector<double> scores;
    for (const auto& tok : text::split(line.substr(7), ' ')) {
      if (tok.empty()) continue;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
      scores.push_back(v);
    }
    if (scores.size() != count) return std::nullopt;
    return scores;
  }
  return std::nullopt;
}

std::string lettered_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    out += std::string(1, static_cast<char>('A' + i)) + ". " + options[i] + "\n";
  }
  return out;
}

std::optional<int> parse_answer_letter(std::string_view output, std::size_t count) {
  for (const auto& raw : text::split_lines(output)) {
    std::string line = text::trim(raw);
    if (!text::istarts_with(line, "ANSWER:")) continue;
    std::string rest = text::trim(line.substr(7));
    if (rest.empty()) return std::nullopt;
    int idx = std::toupper(static_cast<unsigned char>(rest[0])) - 'A';
    if (idx < 0 || static_cast<std::size_t>(idx) >= count) return std::nullopt;
    if (rest.size() > 1 && std::isalnum(static_cast<unsigned char>(rest[1]))) return std::nullopt;
    return idx;
  }
  return std::nullopt;
}

GatewayModel::GatewayModel(Gateway& gateway, ProviderSettings settings, const PromptSet& prompts,
                           int max_in_flight, std::string system_prompt)
    : gateway_(gateway),
      settings_(std::move(settings)),
      prompts_(prompts),
      max_in_flight_(max_in_flight),
      system_prompt_(std::move(system_prompt)) {}

std::string GatewayModel::id() const { return settings_.provider + ":" + settings_.model; }

CompletionRequest GatewayModel::request(const std::string& user_prompt) const {
  CompletionRequest r;
  r.provider_id = settings_.provider;
  r.model_id = settings_.model;
  r.system_prompt = system_prompt_;
  r.user_prompt = user_prompt;
  r.sampling.temperature = settings_.temperature;
  r.sampling.max_tokens = settings_.max_tokens;
  return r;
}

std::vector<std::optional<std::string>> GatewayModel::generate(const std::vector<std::string>& user_prompts) {
  std::vector<CompletionRequest> requests;
  requests.reserve(user_prompts.size());
  for (const auto& p : user_prompts) requests.push_back(request(p));
  auto outcomes = gateway_.complete_batch(requests, max_in_flight_);
  std::vector<std::optional<std::string>> out;
  last_errors_.assign(outcomes.size(), std::nullopt);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok()) {
      out.push_back(outcomes[i].result->text);
    } else {
      out.push_back(std::nullopt);
      last_errors_[i] = outcomes[i].error;
    }
  }
  return out;
}

std::vector<std::optional<std::vector<double>>> GatewayModel::score_options(const std::vector<OptionQuery>& queries) {
  std::vector<std::string> prompts;
  prompts.reserve(queries.size());
  for (const auto& q : queries) {
    prompts.push_back(prompts_.render("options.user", {{"option_count", std::to_string(q.options.size())},
                                                       {"question", q.question},
                                                       {"options_block", lettered_options(q.options)}}));
  }
  auto replies = generate(prompts);
  std::vector<std::optional<std::vector<double>>> out;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    if (!replies[i]) {
      out.push_back(std::nullopt);
      continue;
    }
    auto scores = parse_option_scores(*replies[i], queries[i].options.size());
    if (!scores) last_errors_[i] = Error(ErrorKind::provider_malformed, "unparseable option scores");
    out.push_back(scores);
  }
  return out;
}

}  // namespace cardforge
