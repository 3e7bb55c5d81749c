#include <random>

#include "cardforge/selection.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cardforge;

namespace {

std::vector<double> unit2(double angle_deg) {
  double a = angle_deg * M_PI / 180.0;
  return {std::cos(a), std::sin(a)};
}

// Answers probe i with letter (i % n) when `wrong` is false, otherwise
// always an out-of-range letter.
class FixedModel : public ModelUnderTest {
 public:
  std::vector<std::string> prompts_seen;
  std::string id() const override { return "fixed"; }
  ModelCapabilities capabilities() const override { return {false, true}; }
  std::vector<std::optional<std::string>> generate(const std::vector<std::string>& prompts) override {
    std::vector<std::optional<std::string>> out;
    for (const auto& p : prompts) {
      prompts_seen.push_back(p);
      out.push_back(p.find("Gold-first") != std::string::npos ? "ANSWER: A" : "ANSWER: B");
    }
    return out;
  }
  std::vector<std::optional<std::vector<double>>> score_options(const std::vector<OptionQuery>&) override {
    return {};
  }
};

}  // namespace

TEST_CASE("threshold controls merging") {
  std::vector<std::vector<double>> rows{unit2(0), unit2(10), unit2(90), unit2(95)};
  // cos 10deg = 0.985, cos 5deg = 0.996, cross pairs ~0
  auto c = cluster_rows(rows, 0.7);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::vector<std::size_t>{0, 1});
  CHECK(c[1] == std::vector<std::size_t>{2, 3});
  CHECK(cluster_rows(rows, 0.999).size() == 4);
  CHECK(cluster_rows(rows, 1.0).size() == 4);
}

TEST_CASE("linkage rules differ on a chain") {
  // 0-40-80 degrees: neighbours cos 0.766, ends cos 0.174
  std::vector<std::vector<double>> rows{unit2(0), unit2(40), unit2(80)};
  CHECK(cluster_rows(rows, 0.7, Linkage::single).size() == 1);
  CHECK(cluster_rows(rows, 0.7, Linkage::complete).size() == 2);
  // average of (0.766 + 0.174) / 2 = 0.47 < 0.7
  CHECK(cluster_rows(rows, 0.7, Linkage::average).size() == 2);
}

TEST_CASE("clustering rejects bad input") {
  CHECK_THROWS(cluster_rows({{1.0, 1.0}}, 0.7));
  CHECK_THROWS(cluster_rows({{1.0, 0.0}, {1.0}}, 0.7));
  CHECK_THROWS(cluster_rows({}, 0.7));
}

TEST_CASE("cluster_samples orders by id and picks centres") {
  std::map<std::string, EmbeddingVector> v;
  v["c"] = normalize(unit2(0));
  v["a"] = normalize(unit2(6));
  v["b"] = normalize(unit2(12));
  v["z"] = normalize(unit2(100));
  auto cs = cluster_samples(v, 0.7);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].member_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(cs[0].center_id == "a");  // the middle vector
  CHECK(cs[1].center_id == "z");
  CHECK(cs[1].cluster_id == 1);
}

TEST_CASE("centre ties go to the smaller id") {
  std::map<std::string, EmbeddingVector> v;
  v["m2"] = normalize(unit2(0));
  v["m1"] = normalize(unit2(20));
  Cluster c{0, {"m1", "m2"}, ""};
  CHECK(cluster_center(c, v) == "m1");
}

TEST_CASE("representativeness by cluster size") {
  Cluster c{0, {"a", "b"}, "a"};
  CHECK(representativeness_cluster_size(c, 4) == 0.5);
  CHECK(representativeness_cluster_size(c, 2) == 1.0);
}

TEST_CASE("distinctiveness") {
  std::vector<double> t{1.0, 0.0};
  std::vector<double> same{1.0, 0.0}, opposite{-1.0, 0.0}, ortho{0.0, 1.0};
  CHECK(distinctiveness(t, {same}) == 0.0);
  CHECK(distinctiveness(t, {opposite}) == 2.0);
  CHECK(distinctiveness(t, {same, opposite, ortho}) == doctest::Approx(1.0));
  CHECK_THROWS(distinctiveness(t, std::vector<std::span<const double>>{}));
  CHECK(combined_score(0.5, 0.8) == doctest::Approx(0.4));
}

TEST_CASE("selection order and budget") {
  auto mk = [](std::string id, std::optional<double> s) {
    ScoredSample x;
    x.sample_id = std::move(id);
    x.culture = "GB";
    x.r = 1.0;
    x.d = s;
    x.s = s;
    return x;
  };
  auto r = select({mk("b", 0.5), mk("a", 0.5), mk("c", 0.9), mk("d", 0.1)}, 3, "GB");
  REQUIRE(r.chosen.size() == 3);
  CHECK(r.chosen[0].sample_id == "c");
  CHECK(r.chosen[1].sample_id == "a");
  CHECK(r.chosen[2].sample_id == "b");
  CHECK(select({mk("a", 0.1)}, 5, "GB").chosen.size() == 1);
  CHECK_THROWS(select({mk("a", std::nullopt)}, 5, "GB"));
}

TEST_CASE("probe sets") {
  auto set = parse_probe_set(
      R"({"question":"Q1","options":["x","y"],"gold":0,"topic":"t","culture":"GB"}
{"question":"Q2","options":["x","y","z"],"gold":2,"topic":"t"}
{"question":"Q3","options":["x","y"],"gold":1,"topic":"t","culture":"CN"}
)",
      "inline");
  CHECK(set.items.size() == 3);
  CHECK(set.for_culture("GB", 10).items.size() == 2);
  CHECK(set.for_culture("GB", 1).items.size() == 1);
  CHECK_THROWS(parse_probe_set(R"({"question":"Q","options":["x"],"gold":3,"topic":"t"})", "inline"));
  CHECK_FALSE(load_probe_set("").items.empty());
}

TEST_CASE("in-context representativeness") {
  ProbeSet probes;
  probes.items.push_back({"P1", {"a", "b"}, 0, "t", ""});
  probes.items.push_back({"P2", {"a", "b"}, 1, "t", ""});
  std::map<std::string, EmbeddingVector> v;
  v["s1"] = normalize(unit2(0));
  v["s2"] = normalize(unit2(5));
  v["s3"] = normalize(unit2(40));
  ClusterSample c{"s1", "Gold-first question", "answer one"};
  std::vector<ClusterSample> members{c, {"s2", "second", "answer two"}, {"s3", "third", "answer three"}};
  FixedModel model;
  auto prompts = PromptSet::bundled();
  // the model answers A for both probes: P1 right, P2 wrong
  CHECK(representativeness_in_context(c, members, v, probes, model, 2, prompts, "United Kingdom") == 0.5);
  REQUIRE(model.prompts_seen.size() == 2);
  const auto& p = model.prompts_seen[0];
  CHECK(p.find("answer two") != std::string::npos);
  CHECK(p.find("answer three") == std::string::npos);
  CHECK(p.find("Gold-first") < p.find("answer two"));
  CHECK_THROWS_AS(representativeness_in_context(c, members, v, probes, model, 4, prompts, "United Kingdom"), Error);
}

TEST_CASE("sample text modes") {
  CHECK(sample_text(ClusterText::qa, "Q?", "A.") == "Question: Q?\nAnswer: A.");
  CHECK(sample_text(ClusterText::response, "Q?", "A.") == "A.");
}
