#include "cardforge/config.hpp"
#include "doctest.h"

using namespace cardforge;
using nlohmann::json;

TEST_CASE("defaults") {
  RunConfig c;
  CHECK(c.theta == 0.7);
  CHECK(c.k_questions_per_topic == 100);
  CHECK(c.budget_per_culture == 1000);
  REQUIRE(c.cultures.size() == 5);
  std::vector<std::string> codes;
  for (const auto& x : c.cultures) codes.push_back(x.code);
  CHECK(codes == std::vector<std::string>{"GB", "CN", "KR", "IN", "SG"});
  CHECK(c.scoring_mode == ScoringMode::cluster_size);
  CHECK(c.linkage == Linkage::average);
  CHECK(c.shots == 5);
  CHECK(c.distinctiveness_peers == 4);
  CHECK_NOTHROW(validate(c));
  CHECK(config_from_json(json::object()).theta == 0.7);
}

TEST_CASE("unknown keys and bad values are config errors") {
  auto kind = [](const json& j) {
    try {
      validate(config_from_json(j));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::internal;
  };
  CHECK(kind(json{{"thetaa", 0.5}}) == ErrorKind::config);
  CHECK(kind(json{{"theta", 0.0}}) == ErrorKind::config);
  CHECK(kind(json{{"theta", 1.5}}) == ErrorKind::config);
  CHECK(kind(json{{"budget_per_culture", 0}}) == ErrorKind::config);
  CHECK(kind(json{{"linkage", "ward"}}) == ErrorKind::config);
  CHECK(kind(json{{"cultures", json::array({"GB", "GB"})}}) == ErrorKind::config);
  CHECK(kind(json{{"generation", {{"provider", "mock"}, {"colour", 1}}}}) == ErrorKind::config);
}

TEST_CASE("sections inherit the generation provider") {
  auto c = config_from_json(json{{"generation", {{"provider", "mock"}, {"model", "m1"}}}});
  CHECK(c.probe_model.model == "m1");
  CHECK(c.eval_model.model == "m1");
  auto d = config_from_json(json{{"generation", {{"model", "m1"}}}, {"probe_model", {{"model", "m2"}}}});
  CHECK(d.probe_model.model == "m2");
}

TEST_CASE("cultures as codes or objects") {
  auto c = config_from_json(json{{"cultures", json::array({"GB", {{"code", "JP"}, {"display_name", "Japan"}}})}});
  REQUIRE(c.cultures.size() == 2);
  CHECK(c.cultures[1].display_name == "Japan");
}

TEST_CASE("config hash ignores operational keys") {
  RunConfig a;
  RunConfig b;
  b.max_in_flight = 2;
  b.run_dir = "elsewhere";
  b.fail_fast = true;
  CHECK(config_hash(a) == config_hash(b));
  b.theta = 0.8;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("round trip through json") {
  RunConfig a;
  a.theta = 0.65;
  a.cultures = {{"GB", "United Kingdom"}, {"CN", "China"}};
  auto b = config_from_json(json::parse(to_json(a).dump()));
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("remote providers need credentials") {
  RunConfig c;
  c.generation.provider = "openai";
  ::unsetenv("CARDFORGE_API_KEY");
  try {
    validate_environment(c);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("CARDFORGE_API_KEY") != std::string::npos);
  }
}

TEST_CASE("cache dir precedence") {
  RunConfig c;
  c.run_dir = "r";
  ::unsetenv("CARDFORGE_CACHE_DIR");
  CHECK(effective_cache_dir(c) == "r/cache");
  ::setenv("CARDFORGE_CACHE_DIR", "/tmp/cfenv", 1);
  CHECK(effective_cache_dir(c) == "/tmp/cfenv");
  c.cache_dir = "explicit";
  CHECK(effective_cache_dir(c) == "explicit");
  ::unsetenv("CARDFORGE_CACHE_DIR");
}
