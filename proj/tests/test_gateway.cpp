#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <thread>

#include "cardforge/embedding.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/http_provider.hpp"
#include "cardforge/mock_provider.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

using namespace cardforge;
using testing::ScriptedTransport;

namespace {

CompletionRequest req(const std::string& user, std::string provider = "mock") {
  CompletionRequest r;
  r.provider_id = std::move(provider);
  r.model_id = "m";
  r.system_prompt = "sys";
  r.user_prompt = user;
  r.sampling.seed = 1;
  return r;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

}  // namespace

TEST_CASE("status classification") {
  CHECK(classify_status(200) == ReplyClass::ok);
  CHECK(classify_status(429) == ReplyClass::transient);
  CHECK(classify_status(503) == ReplyClass::transient);
  CHECK(classify_status(0) == ReplyClass::transient);
  CHECK(classify_status(401) == ReplyClass::auth);
  CHECK(classify_status(400) == ReplyClass::fatal);
  CHECK(classify_status(TransportReply::kMalformedReply) == ReplyClass::malformed);
}

TEST_CASE("retry waits stay under the exponential ceiling") {
  RetryPolicy p;
  p.max_attempts = 4;
  p.base_delay = std::chrono::milliseconds(100);
  p.max_delay = std::chrono::milliseconds(250);
  CHECK(p.ceiling(1).count() == 100);
  CHECK(p.ceiling(2).count() == 200);
  CHECK(p.ceiling(3).count() == 250);

  std::vector<std::int64_t> waits;
  int calls = 0;
  auto out = run_with_retry(
      p, [&](std::chrono::milliseconds ms) { waits.push_back(ms.count()); }, 9,
      [&]() -> TransportReply {
        ++calls;
        return calls < 3 ? TransportReply{429, "", "slow down"} : TransportReply{200, "ok", ""};
      },
      "test");
  CHECK(out.attempts == 3);
  REQUIRE(waits.size() == 2);
  CHECK(waits[0] <= 100);
  CHECK(waits[1] <= 200);

  calls = 0;
  CHECK(kind_of([&] {
          run_with_retry(
              p, [](auto) {}, 1, [&] { ++calls; return TransportReply{503, "", ""}; }, "test");
        }) == ErrorKind::provider_exhausted);
  CHECK(calls == 4);

  calls = 0;
  CHECK(kind_of([&] {
          run_with_retry(
              p, [](auto) {}, 1, [&] { ++calls; return TransportReply{401, "", ""}; }, "test");
        }) == ErrorKind::provider_auth);
  CHECK(calls == 1);
}

TEST_CASE("mock output is a pure function of the request") {
  auto a = req("[[cf:questions k=3 topic=t]] give me questions");
  CHECK(mock_complete(a) == mock_complete(a));
  auto b = a;
  b.sampling.seed = 2;
  CHECK(mock_complete(a) != mock_complete(b));
  auto lines = mock_complete(a);
  CHECK(std::count(lines.begin(), lines.end(), '\n') >= 2);
  CHECK(mock_complete(req("no tag here")).rfind("ECHO: ", 0) == 0);
  auto tag = find_stage_tag("x [[cf:options n=3]] y");
  REQUIRE(tag);
  CHECK(tag->stage == "options");
  CHECK(tag->params.at("n") == "3");
}

TEST_CASE("gateway caches completions on disk") {
  testing::TempDir dir("gw");
  auto transport = std::make_shared<ScriptedTransport>();
  std::string first;
  {
    Gateway g(testing::quiet_gateway(dir.path()));
    g.register_transport("mock", transport);
    auto r = g.complete(req("hello [[cf:binary]]"));
    CHECK_FALSE(r.cached);
    first = r.text;
    CHECK(g.complete(req("hello [[cf:binary]]")).cached);
    CHECK(g.transport_calls() == 1);
  }
  Gateway g2(testing::quiet_gateway(dir.path()));
  g2.register_transport("mock", transport);
  auto again = g2.complete(req("hello [[cf:binary]]"));
  CHECK(again.cached);
  CHECK(again.text == first);
  CHECK(g2.transport_calls() == 0);
}

TEST_CASE("batch failures are positional and fail_fast cancels the rest") {
  auto transport = std::make_shared<ScriptedTransport>([](const CompletionRequest& r) -> std::optional<TransportReply> {
    if (r.user_prompt.find("bad") != std::string::npos) return TransportReply{400, "", "rejected"};
    return std::nullopt;
  });
  Gateway g(testing::quiet_gateway());
  g.register_transport("mock", transport);
  std::vector<CompletionRequest> batch{req("a"), req("bad"), req("c")};
  auto out = g.complete_batch(batch, 1);
  CHECK(out[0].ok());
  CHECK_FALSE(out[1].ok());
  CHECK(out[1].error->kind() == ErrorKind::provider_exhausted);
  CHECK(out[2].ok());

  std::vector<CompletionRequest> batch2{req("bad 2"), req("d"), req("e")};
  auto ff = g.complete_batch(batch2, 1, true);
  CHECK_FALSE(ff[0].ok());
  CHECK_FALSE(ff[2].ok());
}

TEST_CASE("unknown provider is a config error") {
  Gateway g(testing::quiet_gateway());
  CHECK(kind_of([&] { g.complete(req("x", "nobody")); }) == ErrorKind::config);
}

TEST_CASE("in-flight window bounds concurrency") {
  std::atomic<int> live{0}, peak{0};
  auto transport = std::make_shared<ScriptedTransport>([&](const CompletionRequest&) -> std::optional<TransportReply> {
    int now = ++live;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --live;
    return std::nullopt;
  });
  auto opts = testing::quiet_gateway();
  opts.max_in_flight = 2;
  Gateway g(opts);
  g.register_transport("mock", transport);
  std::vector<CompletionRequest> batch;
  for (int i = 0; i < 12; ++i) batch.push_back(req("item " + std::to_string(i)));
  auto out = g.complete_batch(batch, 6);
  for (const auto& o : out) CHECK(o.ok());
  CHECK(peak.load() <= 2);
}

TEST_CASE("http transport speaks the chat completions protocol") {
  httplib::Server server;
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    seen_auth = rq.get_header_value("Authorization");
    auto body = nlohmann::json::parse(rq.body);
    if (body["messages"].back()["content"] == "malformed") {
      rs.set_content("{\"nothing\":1}", "application/json");
      return;
    }
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}}};
    rs.set_content(reply.dump(), "application/json");
  });
  server.Post("/v1/embeddings", [&](const httplib::Request& rq, httplib::Response& rs) {
    auto body = nlohmann::json::parse(rq.body);
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) {
      data.push_back({{"index", i}, {"embedding", {1.0 + i, 2.0, 2.0}}});
    }
    rs.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  ep.api_key = "secret";
  ep.timeout = std::chrono::seconds(5);
  HttpChatTransport t(ep);
  auto ok = t.send(req("ping", "openai"));
  CHECK(ok.status == 200);
  CHECK(ok.text == "pong");
  CHECK(seen_auth == "Bearer secret");
  auto bad = t.send(req("malformed", "openai"));
  CHECK(classify_status(bad.status) == ReplyClass::malformed);

  HttpEmbeddingProvider emb(ep, "e", RetryPolicy{}, [](auto) {});
  auto vecs = emb.embed({"a", "b"});
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[1][0] == 2.0);

  server.stop();
  th.join();
}

TEST_CASE("fallback embeddings are normalized and deterministic") {
  auto a = fallback_embed("Tea with milk", 64);
  auto b = fallback_embed("tea with milk", 64);
  CHECK(a.values == b.values);
  double n = 0;
  for (double x : a.values) n += x * x;
  CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(cosine(a, fallback_embed("completely different words", 64)) < 0.9);
  CHECK_NOTHROW(fallback_embed("é", 16));
}

TEST_CASE("embedding service caches and the sidecar round-trips") {
  testing::TempDir dir("emb");
  EmbeddingService svc(std::make_shared<FallbackEmbeddingProvider>(32), dir.path() / "emb");
  auto v = svc.embed_texts({"alpha", "beta", "alpha"});
  CHECK(v[0].values == v[2].values);
  auto calls = svc.provider_calls();
  EmbeddingService svc2(std::make_shared<FallbackEmbeddingProvider>(32), dir.path() / "emb");
  auto w = svc2.embed_texts({"beta"});
  CHECK(svc2.provider_calls() == 0);
  CHECK(calls >= 1);
  CHECK_THROWS(svc.embed_texts({""}));

  std::vector<SidecarRow> rows{{"s1", &v[0]}, {"s2", &v[1]}};
  write_embedding_sidecar(dir.path() / "e.f32", dir.path() / "e.json", rows);
  auto back = read_embedding_sidecar(dir.path() / "e.f32", dir.path() / "e.json");
  REQUIRE(back.size() == 2);
  CHECK(back.at("s2").values[0] == doctest::Approx(v[1].values[0]).epsilon(1e-6));
}
