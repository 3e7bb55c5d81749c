#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cardforge/gateway.hpp"

namespace cardforge {

// Offline provider. Its output is a pure function of the request key and the
// stage tag `[[cf:<stage> key=value ...]]` carried by the prompt templates,
// and follows the grammar the synthesis and evaluation parsers expect:
//
//   questions  n lines "<i>. [<qtype>] <question>?"      (n = k param)
//   response   "RESPONSE:\n<text>"                        (also contrastive, open_answer)
//   adapt      "CHARACTERISTICS:\n- <code>: ...\nREASONING:\n...\nFINAL QUESTION: <q>?"
//   probe      "ANSWER: <letter>"                         (letter < n param)
//   binary     "ANSWER: true|false"
//   options    "SCORES: s1 ... sn"                        (integers 1..5)
//   judge      "SCORE: <1 + (first byte of response_sha) mod 5>"
//
// Any other prompt gets "ECHO: <first 16 hex chars of the request key>".
inline constexpr std::string_view kMockGrammarVersion = "cf-mock/1";

struct StageTag {
  std::string stage;
  std::map<std::string, std::string> params;
};

/// First `[[cf:...]]` tag in the text, if any.
std::optional<StageTag> find_stage_tag(std::string_view prompt);

std::string mock_complete(const CompletionRequest& request);

/// Score the mock judge gives a response whose SHA-256 hex digest is `sha`.
int mock_judge_score(std::string_view response_sha);

class MockTransport : public Transport {
 public:
  TransportReply send(const CompletionRequest& request) override { return {200, mock_complete(request), {}}; }
};

}  // namespace cardforge
