#include <set>

#include "cardforge/hashing.hpp"
#include "cardforge/prompts.hpp"
#include "cardforge/records.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/taxonomy.hpp"
#include "cardforge/text.hpp"
#include "doctest.h"

using namespace cardforge;

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("content hash depends on field order and values") {
  auto a = content_hash(ordered_json::array({"x", "y"}));
  CHECK(a == content_hash(ordered_json::array({"x", "y"})));
  CHECK(a != content_hash(ordered_json::array({"y", "x"})));
  CHECK(a.size() == 64);
}

TEST_CASE("derived seeds are label driven") {
  CHECK(derive_seed(42, "a", "b") == derive_seed(42, "a", "b"));
  CHECK(derive_seed(42, "a", "b") != derive_seed(43, "a", "b"));
  CHECK(derive_seed(42, "a", "b") != derive_seed(42, "ab", ""));
  Rng rng(7);
  auto idx = sample_indices(10, 4, rng);
  CHECK(idx.size() == 4);
  CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 4);
}

TEST_CASE("question records round-trip with stable ids") {
  auto u = QuestionRecord::make_universal("values.tradition", QuestionType::scenario, "What happens at a wedding?");
  CHECK(u.id == u.expected_id());
  auto a = QuestionRecord::make_adapted(u, "KR", "What happens at a wedding in Korea?");
  CHECK(a.parent_id == u.id);
  CHECK(a.adapted_for == "KR");
  CHECK(a.id != u.id);

  auto line = to_jsonl_line(a);
  auto v = validate_question(line);
  REQUIRE(v.ok());
  CHECK(*v.record == a);
  CHECK(line.rfind("{\"id\":", 0) == 0);
}

TEST_CASE("validation names the first failing field") {
  auto r = validate_record(R"({"question_id":"q","culture":"GB","stage":"isolated","peer_cultures":[]})",
                           RecordKind::response);
  CHECK_FALSE(r.ok);
  REQUIRE(r.error);
  CHECK(r.error->kind == ValidationErrorKind::missing_field);
  CHECK(r.error->field == "text");

  auto bad = validate_record("{not json", RecordKind::question);
  CHECK(bad.error->kind == ValidationErrorKind::malformed_syntax);

  auto u = QuestionRecord::make_universal("values.tradition", QuestionType::scenario, "Q?");
  auto j = to_json(u);
  j["id"] = "deadbeef";
  auto tampered = validate_record(canonical_dump(j), RecordKind::question);
  CHECK_FALSE(tampered.ok);
  CHECK(tampered.error->field == "id");
}

TEST_CASE("scored sample ids hash question, culture and response") {
  auto a = ScoredSample::make_id("q1", "GB", "tea");
  CHECK(a == ScoredSample::make_id("q1", "GB", "tea"));
  CHECK(a != ScoredSample::make_id("q1", "CN", "tea"));
}

TEST_CASE("builtin taxonomy layout") {
  auto t = builtin_taxonomy();
  CHECK(t.size() == 38);
  CHECK(t.at_level(TopicLevel::values).size() == 16);
  CHECK(t.at_level(TopicLevel::social_norms).size() == 8);
  CHECK(t.at_level(TopicLevel::behavioral_practices).size() == 5);
  CHECK(t.at_level(TopicLevel::specific_customs).size() == 9);
  std::set<std::string> ids;
  for (const auto& topic : t.topics()) ids.insert(topic.topic_id);
  CHECK(ids.size() == 38);
  // serialization round-trips
  CHECK(parse_taxonomy(t.to_jsonl()).topics() == t.topics());
}

TEST_CASE("custom taxonomy count check") {
  std::string one =
      R"({"topic_id":"x.one","level":"values","name":"One","description":"A topic.","source":"curated"})"
      "\n";
  CHECK_THROWS(parse_taxonomy(one));
  CHECK(parse_taxonomy(one, TaxonomyOptions{false}).size() == 1);
}

TEST_CASE("template rendering") {
  CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}, {"z", "3"}}) == "a 1 b 2");
  CHECK_THROWS_AS(render_template("{{missing}}", {}), Error);
  auto p = PromptSet::bundled();
  CHECK_FALSE(p.digest().empty());
  CHECK_NOTHROW(p.raw("questions.user"));
}

TEST_CASE("text helpers") {
  CHECK(text::normalize_for_dedup("  What \t is  Tea? ") == text::normalize_for_dedup("what is tea?"));
  CHECK(text::split_lines("a\r\nb\n").size() == 2);
  CHECK(text::sanitize_utf8(std::string("ok\xff", 3)) != std::string("ok\xff", 3));
}
