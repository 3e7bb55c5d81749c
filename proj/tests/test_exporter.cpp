#include <set>

#include "cardforge/exporter.hpp"
#include "doctest.h"

using namespace cardforge;

namespace {

SelectionResult selection_of(std::vector<std::pair<std::string, std::string>> items) {
  SelectionResult r;
  r.culture = "GB";
  for (auto& [id, text] : items) {
    ScoredSample s;
    s.sample_id = id;
    s.culture = "GB";
    s.question_text = "Question for " + id;
    s.response_text = text;
    r.chosen.push_back(s);
  }
  return r;
}

}  // namespace

TEST_CASE("sft records keep selection order") {
  auto prompts = PromptSet::bundled();
  auto sel = selection_of({{"s2", "two"}, {"s1", "one"}});
  auto recs = export_sft(sel, true, prompts, "United Kingdom");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].sample_id == "s2");
  CHECK(recs[0].assistant == "two");
  REQUIRE(recs[0].system);
  CHECK(recs[0].system->find("United Kingdom") != std::string::npos);
  auto bare = export_sft(sel, false, prompts, "United Kingdom");
  CHECK_FALSE(bare[0].system);
  CHECK(canonical_dump(to_json(bare[0])).find("system") == std::string::npos);
  CHECK_THROWS(export_sft(selection_of({}), true, prompts, "United Kingdom"));
}

TEST_CASE("preference pairs use distinct peer cultures") {
  auto sel = selection_of({{"s1", "mine"}, {"s2", "also mine"}, {"s3", "lonely"}});
  std::map<std::string, std::vector<PeerResponse>> peers;
  peers["s1"] = {{"CN", "cn text"}, {"KR", "kr text"}, {"GB", "self"}, {"IN", "mine"}};
  peers["s2"] = {{"SG", "sg text"}};
  auto out = export_preference_pairs(sel, peers, 2, 42);
  CHECK(out.skipped == std::vector<std::string>{"s3"});
  REQUIRE(out.records.size() == 3);
  std::set<std::string> s1_peers;
  for (const auto& r : out.records) {
    CHECK(r.peer_culture != r.target_culture);
    CHECK(r.chosen != r.rejected);
    if (r.sample_id == "s1") {
      s1_peers.insert(r.peer_culture);
      CHECK(r.chosen == "mine");
    }
  }
  CHECK(s1_peers.size() == 2);
  CHECK(s1_peers.count("IN") == 0);

  auto again = export_preference_pairs(sel, peers, 2, 42);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    CHECK(again.records[i].peer_culture == out.records[i].peer_culture);
  }
  CHECK_THROWS_AS(export_preference_pairs(sel, peers, 1, 42, true), Error);
}

TEST_CASE("export format names") {
  CHECK(parse_export_format("sft") == ExportFormat::sft);
  CHECK(parse_export_format("dpo") == ExportFormat::dpo);
  CHECK(parse_export_format("all") == ExportFormat::all);
  CHECK_FALSE(parse_export_format("csv"));
}
