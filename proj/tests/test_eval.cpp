#include <cmath>

#include "cardforge/eval.hpp"
#include "cardforge/fileio.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cardforge;

namespace {

class ScriptedModel : public ModelUnderTest {
 public:
  std::vector<std::optional<std::string>> replies;
  std::size_t next = 0;

  std::string id() const override { return "scripted"; }
  ModelCapabilities capabilities() const override { return {true, true}; }
  std::vector<std::optional<std::string>> generate(const std::vector<std::string>& prompts) override {
    std::vector<std::optional<std::string>> out;
    for (std::size_t i = 0; i < prompts.size(); ++i) out.push_back(replies.at(next++));
    return out;
  }
  // keyed by question text
  std::map<std::string, std::optional<std::vector<double>>> scores;
  std::vector<std::optional<std::vector<double>>> score_options(const std::vector<OptionQuery>& q) override {
    std::vector<std::optional<std::vector<double>>> out;
    for (const auto& x : q) out.push_back(scores.at(x.question));
    return out;
  }
};

}  // namespace

TEST_CASE("jensen-shannon basics") {
  std::vector<double> p{0.5, 0.5}, q{1.0, 0.0}, r{0.0, 1.0};
  CHECK(js_divergence(p, p) == 0.0);
  CHECK(js_divergence(q, r) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(js_similarity(q, r) == doctest::Approx(0.0));
  // JSD([1,0],[.5,.5]) = 1 - 0.75 log2(4/3) ... computed by hand
  double expect = 0.5 * (1.0 * std::log2(1.0 / 0.75)) + 0.5 * (0.5 * std::log2(0.5 / 0.75) + 0.5 * std::log2(0.5 / 0.25));
  CHECK(js_divergence(q, p) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(js_similarity(q, p, true) == doctest::Approx(1.0 - expect));
  CHECK_THROWS(js_divergence(std::vector<double>{0.5, 0.6}, p));
  CHECK_THROWS(js_divergence(std::vector<double>{-0.1, 1.1}, p));
  CHECK_THROWS(js_divergence(std::vector<double>{1.0}, p));
}

TEST_CASE("softmax") {
  auto s = softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(s[0] == doctest::Approx(0.5));
  auto t = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(t[1] == doctest::Approx(0.75));
}

TEST_CASE("true/false parsing") {
  CHECK(parse_true_false("ANSWER: True") == true);
  CHECK(parse_true_false("no, that is false") == false);
  CHECK(parse_true_false("Yes.") == true);
  CHECK_FALSE(parse_true_false("untrue statement"));
  CHECK_FALSE(parse_true_false(""));
}

TEST_CASE("judge score parsing") {
  CHECK(parse_judge_score("reasoning\nSCORE: 4") == 4);
  CHECK_FALSE(parse_judge_score("SCORE: 9"));
  CHECK_FALSE(parse_judge_score("score four"));
}

TEST_CASE("binary groups need all four answers") {
  auto prompts = PromptSet::bundled();
  BinaryGroup g{"g", {"a", "b", "c", "d"}, {true, false, true, true}};
  ScriptedModel m;
  m.replies = {"true", "false", "true", "true", "true", "false", "true", "false", "garbage", "false", "true", "true"};
  auto s = score_binary_hard(m, {g, g, g}, prompts);
  CHECK(s.groups[0].score == 1);
  CHECK(s.groups[1].score == 0);
  CHECK(s.groups[1].correct == 3);
  CHECK(s.groups[2].score == 0);
  CHECK(s.unparseable == 1);
  CHECK(s.accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(s.per_question_accuracy == doctest::Approx(10.0 / 12.0));
}

TEST_CASE("opinion items report statuses") {
  OpinionItem a{"qa", {"x", "y"}, {{"GB", {0.5, 0.5}}}};
  OpinionItem b{"qb", {"x", "y"}, {{"CN", {0.5, 0.5}}}};
  OpinionItem c{"qc", {"x", "y"}, {{"GB", {1.0, 0.0}}}};
  OpinionItem d{"qd", {"x", "y"}, {{"GB", {0.2, 0.8}}}};
  ScriptedModel m;
  m.scores = {{"qa", std::vector<double>{0.0, 0.0}},
              {"qb", std::vector<double>{1.0, 2.0}},
              {"qc", std::nullopt},
              {"qd", std::vector<double>{1.0, 2.0, 3.0}}};
  auto s = score_opinion_set(m, {a, b, c, d}, "GB");
  CHECK(s.items[0].status == "scored");
  CHECK(s.items[0].similarity == doctest::Approx(1.0));
  CHECK(s.items[1].status == "no_gold");
  CHECK(s.items[2].status == "model_failure");
  CHECK(s.items[3].status == "option_mismatch");
  CHECK(s.scored == 1);
  CHECK_THROWS(score_opinion_set(m, {b}, "GB"));
}

TEST_CASE("eval file parsers") {
  CHECK(parse_opinion_items(R"({"question":"q","options":["a","b"],"gold":{"GB":[0.4,0.6]}})", "x").size() == 1);
  CHECK_THROWS(parse_opinion_items(R"({"question":"q","options":["a","b"],"gold":{"GB":[0.4,0.7]}})", "x"));
  CHECK_THROWS(parse_binary_groups(R"({"group_id":"g","questions":["a","b","c"],"golds":[true,true,true]})", "x"));
  auto open = parse_open_items(R"({"question":"q","culture":"GB","rubric":"r","response":"pre"})", "x");
  CHECK(open[0].response == "pre");
}

TEST_CASE("judge gets one repair prompt") {
  Gateway g(testing::quiet_gateway());
  int judge_calls = 0;
  const std::string bad_first = sha256_hex("bad first");
  const std::string always_bad = sha256_hex("always bad");
  g.register_transport("mock", std::make_shared<testing::ScriptedTransport>(
                                   [&](const CompletionRequest& r) -> std::optional<TransportReply> {
                                     const auto& u = r.user_prompt;
                                     if (u.find("[[cf:judge") == std::string::npos) return std::nullopt;
                                     ++judge_calls;
                                     bool repair = u.find("repair=1") != std::string::npos;
                                     if (u.find(always_bad) != std::string::npos) return TransportReply{200, "I refuse", ""};
                                     if (u.find(bad_first) != std::string::npos) {
                                       return TransportReply{200, repair ? "SCORE: 2" : "I refuse", ""};
                                     }
                                     return std::nullopt;
                                   }));
  auto prompts = PromptSet::bundled();
  std::vector<OpenItem> items{{"q1", "GB", "rubric", std::nullopt},
                              {"q2", "GB", "rubric", std::nullopt},
                              {"q3", "GB", "rubric", std::nullopt}};
  ProviderSettings judge{"mock", "judge", 0.0, 128};
  auto s = judge_open_responses(g, judge, prompts, items, {"fine answer", "bad first", "always bad"}, default_roster(),
                                2);
  CHECK(s.items[0].status == "scored");
  CHECK(s.items[0].score == mock_judge_score(sha256_hex("fine answer")));
  CHECK(s.items[1].status == "repaired");
  CHECK(s.items[1].score == 2);
  CHECK(s.items[2].status == "excluded");
  CHECK(s.scored == 2);
  CHECK(judge_calls == 5);
}
