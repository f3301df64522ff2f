#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "zsdt/llm_client.hpp"

using namespace zsdt;

namespace {

class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

ProviderConfig http_config(const std::string& url) {
  ProviderConfig c;
  c.endpoint_url = url;
  c.model_name = "test-model";
  c.api_key_env = "ZSDT_TEST_KEY";
  c.backoff_initial = 0.001;
  c.request_timeout = 5.0;
  return c;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::path(ZSDT_BINARY_DIR) / "tmp" / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

// Hash of {"model":"m","temperature":0.0,"attempt_index":0,"sample_index":0,"prompt":"hello"}
// computed independently with Python hashlib.
TEST(LlmClient, PromptHashOracle) {
  ProviderConfig c;
  c.model_name = "m";
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  auto h = prompt_hash(c, {"hello", 0, 0});
  EXPECT_EQ(h, "7cc315ff84928fcb31b077c622844ce555b7e27a828ad1116c0c4d4e756c057d");
  EXPECT_NE(h, prompt_hash(c, {"hello", 1, 0}));
  EXPECT_NE(h, prompt_hash(c, {"hello", 0, 1}));
  c.temperature = 0.5;
  EXPECT_NE(h, prompt_hash(c, {"hello", 0, 0}));
}

TEST(LlmClient, RequestShapeAndAuthHeader) {
  LocalServer srv;
  nlohmann::json seen_body;
  std::string seen_auth, seen_path;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = nlohmann::json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    seen_path = req.path;
    res.set_content(reply("|- class: a"), "application/json");
  });
  ::setenv("ZSDT_TEST_KEY", "sekrit", 1);
  auto cfg = http_config(srv.url());
  cfg.temperature = 0.7;
  cfg.max_output_tokens = 77;
  LlmClient client(cfg, std::make_shared<HttpProvider>());
  EXPECT_EQ(client.complete("the prompt", 0), "|- class: a");
  EXPECT_EQ(seen_auth, "Bearer sekrit");
  EXPECT_EQ(seen_path, "/v1/chat/completions");
  EXPECT_EQ(seen_body["model"], "test-model");
  EXPECT_EQ(seen_body["temperature"], 0.7);
  EXPECT_EQ(seen_body["max_tokens"], 77);
  ASSERT_EQ(seen_body["messages"].size(), 1u);
  EXPECT_EQ(seen_body["messages"][0]["role"], "user");
  EXPECT_EQ(seen_body["messages"][0]["content"], "the prompt");
  ::unsetenv("ZSDT_TEST_KEY");
}

TEST(LlmClient, RetriesServerErrors) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = hits == 1 ? 503 : 429;
      return;
    }
    res.set_content(reply("ok"), "application/json");
  });
  LlmClient client(http_config(srv.url()), std::make_shared<HttpProvider>());
  EXPECT_EQ(client.complete("p", 0), "ok");
  EXPECT_EQ(hits.load(), 3);
}

TEST(LlmClient, GivesUpAfterTransportRetries) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  auto cfg = http_config(srv.url());
  cfg.transport_retries = 2;
  LlmClient client(cfg, std::make_shared<HttpProvider>());
  EXPECT_THROW(client.complete("p", 0), NetworkError);
  EXPECT_EQ(hits.load(), 3);
}

TEST(LlmClient, AuthFailureIsNotRetried) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  LlmClient client(http_config(srv.url()), std::make_shared<HttpProvider>());
  EXPECT_THROW(client.complete("p", 0), AuthError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(LlmClient, EmptyAndMalformedResponses) {
  LocalServer srv;
  std::string body = reply("");
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(body, "application/json");
  });
  LlmClient client(http_config(srv.url()), std::make_shared<HttpProvider>());
  EXPECT_THROW(client.complete("p", 0), EmptyResponse);
  body = R"({"choices": []})";
  EXPECT_THROW(client.complete("p", 1), EmptyResponse);
  body = "not json";
  EXPECT_THROW(client.complete("p", 2), NetworkError);
}

TEST(LlmClient, ConnectionRefusedIsNetworkError) {
  auto cfg = http_config("http://127.0.0.1:1/v1");
  cfg.transport_retries = 1;
  LlmClient client(cfg, std::make_shared<HttpProvider>());
  EXPECT_THROW(client.complete("p", 0), NetworkError);
}

TEST(LlmClient, CacheLayoutAndReuse) {
  auto dir = fresh_dir("cache_layout");
  auto mock = std::make_shared<MockProvider>(std::vector<std::string>{"first", "second"});
  ProviderConfig cfg;
  cfg.model_name = "mock";
  {
    LlmClient client(cfg, mock, {dir, false, 2});
    EXPECT_EQ(client.complete("p", 0), "first");
    EXPECT_EQ(client.complete("p", 0), "first");
    EXPECT_EQ(client.complete("p", 1), "second");
    EXPECT_EQ(mock->calls(), 2u);
  }
  const auto hash = prompt_hash(cfg, {"p", 0, 0});
  const auto file = dir / hash.substr(0, 2) / (hash + ".json");
  ASSERT_TRUE(std::filesystem::exists(file));
  auto rec = nlohmann::json::parse(read_file(file));
  EXPECT_EQ(rec["prompt_hash"], hash);
  EXPECT_EQ(rec["model_name"], "mock");
  EXPECT_EQ(rec["attempt_index"], 0);
  EXPECT_EQ(rec["sample_index"], 0);
  EXPECT_EQ(rec["response_text"], "first");
  EXPECT_TRUE(rec.contains("timestamp"));

  // A new client over the same directory is served from disk.
  auto silent = std::make_shared<MockProvider>(std::vector<std::string>{});
  LlmClient again(cfg, silent, {dir, true, 1});
  EXPECT_EQ(again.complete("p", 1), "second");
  EXPECT_EQ(silent->calls(), 0u);
}

TEST(LlmClient, OfflineMissOnRemoteProvider) {
  auto dir = fresh_dir("offline_miss");
  auto cfg = http_config("http://127.0.0.1:1/v1");
  LlmClient client(cfg, std::make_shared<HttpProvider>(), {dir, true, 1});
  EXPECT_THROW(client.complete("never cached", 0), OfflineCacheMiss);
  EXPECT_EQ(client.provider_calls(), 0u);
}

TEST(LlmClient, FixtureProviderCyclesBySample) {
  ProviderConfig cfg;
  cfg.model_name = "fixture";
  LlmClient client(cfg, std::make_shared<FixtureProvider>(std::vector<std::string>{"a", "b", "c"}), {std::nullopt, true, 1});
  EXPECT_EQ(client.complete("x", 0, 0), "a");
  EXPECT_EQ(client.complete("y", 3, 1), "b");
  EXPECT_EQ(client.complete("z", 0, 5), "c");
  EXPECT_THROW(FixtureProvider({}), ConfigError);
}

TEST(LlmClient, ConfigChecks) {
  ProviderConfig cfg;
  cfg.temperature = 2.5;
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg.temperature = 1.0;
  cfg.max_output_tokens = 0;
  EXPECT_THROW(cfg.check(), ConfigError);
  EXPECT_THROW(LlmClient(ProviderConfig{}, nullptr), ConfigError);
}

TEST(LlmClient, CompleteUntilValid) {
  auto mock = std::make_shared<MockProvider>(std::vector<std::string>{"bad", "bad", "good"});
  LlmClient client(ProviderConfig{}, mock);
  auto r = complete_until_valid(client, "p", [](const std::string& s) { return s == "good"; });
  EXPECT_EQ(r.text, "good");
  EXPECT_EQ(r.attempts, 3u);
  auto reqs = mock->requests();
  EXPECT_EQ(reqs[2].attempt_index, 2u);
}
