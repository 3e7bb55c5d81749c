#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/prompts.hpp"

namespace cardforge {

struct ModelCapabilities {
  bool option_scoring = false;
  bool free_text = false;
};

struct OptionQuery {
  std::string question;
  std::vector<std::string> options;
};

// A model being probed or evaluated. Batch calls are positional; a failed
// item is nullopt and the caller decides how to count it.
class ModelUnderTest {
 public:
  virtual ~ModelUnderTest() = default;

  virtual std::string id() const = 0;
  virtual ModelCapabilities capabilities() const = 0;

  /// Free-text replies to fully rendered user prompts.
  virtual std::vector<std::optional<std::string>> generate(const std::vector<std::string>& user_prompts) = 0;

  /// One raw score per option (log-likelihood or rating); higher is more likely.
  virtual std::vector<std::optional<std::vector<double>>> score_options(const std::vector<OptionQuery>& queries) = 0;
};

/// Parses "SCORES: s1 s2 ..." with exactly `count` numbers.
std::optional<std::vector<double>> parse_option_scores(std::string_view output, std::size_t count);

// Model reached through the gateway. Option scores come from the rating
// prompt ("options.user"); free text is returned verbatim.
class GatewayModel : public ModelUnderTest {
 public:
  GatewayModel(Gateway& gateway, ProviderSettings settings, const PromptSet& prompts, int max_in_flight,
               std::string system_prompt = {});

  std::string id() const override;
  ModelCapabilities capabilities() const override { return {true, true}; }
  std::vector<std::optional<std::string>> generate(const std::vector<std::string>& user_prompts) override;
  std::vector<std::optional<std::vector<double>>> score_options(const std::vector<OptionQuery>& queries) override;

  /// Errors of the most recent batch, positional.
  const std::vector<std::optional<Error>>& last_errors() const { return last_errors_; }

 private:
  CompletionRequest request(const std::string& user_prompt) const;

  Gateway& gateway_;
  ProviderSettings settings_;
  const PromptSet& prompts_;
  int max_in_flight_;
  std::string system_prompt_;
  std::vector<std::optional<Error>> last_errors_;
};

/// Renders an option list as "A. first\nB. second\n...".
std::string lettered_options(const std::vector<std::string>& options);

/// Index of the letter in "ANSWER: <letter>" if it is below `count`.
std::optional<int> parse_answer_letter(std::string_view output, std::size_t count);

}  // namespace cardforge
