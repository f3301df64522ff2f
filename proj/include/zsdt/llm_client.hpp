#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include <httplib.h>
// <resolv.h> (pulled in by httplib) defines _res, which collides with Eigen parameter names.
#ifdef _res
#undef _res
#endif
#include <json.hpp>

#include "zsdt/error.hpp"
#include "zsdt/schema.hpp"

namespace zsdt {

struct ProviderConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string api_key_env = "LLM_API_KEY";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  double request_timeout = 60.0;  // seconds
  int transport_retries = 3;
  double backoff_initial = 1.0;  // seconds; doubles after every transport retry

  void check() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
      throw ConfigError("temperature must lie in [0, 2], got " + std::to_string(temperature));
    }
    if (!(request_timeout > 0.0)) throw ConfigError("request timeout must be positive");
    if (max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
    if (transport_retries < 0) throw ConfigError("transport_retries must be >= 0");
  }
};

/// What is asked of the provider. `sample_index` distinguishes independent
/// draws of the same prompt (several trees per prompt, several repeats);
/// `attempt_index` numbers validity retries within one draw.
struct CompletionRequest {
  std::string prompt;
  std::size_t attempt_index = 0;
  std::size_t sample_index = 0;
};

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// Digest of everything that determines a completion.
inline std::string prompt_hash(const ProviderConfig& config, const CompletionRequest& request) {
  nlohmann::ordered_json key;
  key["model"] = config.model_name;
  key["temperature"] = config.temperature;
  key["attempt_index"] = request.attempt_index;
  key["sample_index"] = request.sample_index;
  key["prompt"] = request.prompt;
  return sha256_hex(key.dump());
}

struct CompletionRecord {
  std::string prompt_hash;
  std::string model_name;
  double temperature = 0.0;
  std::size_t attempt_index = 0;
  std::size_t sample_index = 0;
  std::string response_text;
  std::string timestamp;  // UTC, ISO 8601

  nlohmann::json to_json() const {
    return {{"prompt_hash", prompt_hash},     {"model_name", model_name},
            {"temperature", temperature},     {"attempt_index", attempt_index},
            {"sample_index", sample_index},   {"response_text", response_text},
            {"timestamp", timestamp}};
  }

  static CompletionRecord from_json(const nlohmann::json& j) {
    CompletionRecord r;
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.model_name = j.at("model_name").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.attempt_index = j.at("attempt_index").get<std::size_t>();
    r.sample_index = j.value("sample_index", std::size_t{0});
    r.response_text = j.at("response_text").get<std::string>();
    r.timestamp = j.value("timestamp", std::string{});
    return r;
  }
};

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Content-addressed store: {root}/{hash[0:2]}/{hash}.json. Records are
/// written once (temp file + rename) and never modified.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(std::string_view hash) const {
    return root_ / std::string(hash.substr(0, 2)) / (std::string(hash) + ".json");
  }

  std::optional<CompletionRecord> load(std::string_view hash) const {
    auto path = path_for(hash);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
      return CompletionRecord::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt cache record '" + path.string() + "': " + e.what());
    }
  }

  void store(const CompletionRecord& record) const {
    auto path = path_for(record.prompt_hash);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create cache directory '" + path.parent_path().string() + "'");
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "_" +
           std::to_string(counter.fetch_add(1));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write cache record '" + tmp.string() + "'");
      out << record.to_json().dump(2) << '\n';
      if (!out) throw IoError("cannot write cache record '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot commit cache record '" + path.string() + "'");
  }

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

/// Source of completions.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string send(const ProviderConfig& config, const CompletionRequest& request) = 0;
  /// Remote providers perform network I/O and are refused in offline mode.
  virtual bool is_remote() const noexcept { return true; }
};

/// Returns scripted responses in order; throws once the script runs out.
class MockProvider : public Provider {
 public:
  explicit MockProvider(std::vector<std::string> script) : script_(std::move(script)) {}

  std::string send(const ProviderConfig&, const CompletionRequest& request) override {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (next_ >= script_.size()) throw ScriptExhausted("mock provider script exhausted");
    return script_[next_++];
  }

  bool is_remote() const noexcept override { return false; }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
  }
  std::vector<CompletionRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> script_;
  std::size_t next_ = 0;
  std::vector<CompletionRequest> requests_;
};

/// Offline stand-in for a model: draw k always yields fixtures[k mod n],
/// whatever the prompt or attempt.
class FixtureProvider : public Provider {
 public:
  explicit FixtureProvider(std::vector<std::string> fixtures) : fixtures_(std::move(fixtures)) {
    if (fixtures_.empty()) throw ConfigError("fixture provider needs at least one response");
  }

  std::string send(const ProviderConfig&, const CompletionRequest& request) override {
    return fixtures_[request.sample_index % fixtures_.size()];
  }

  bool is_remote() const noexcept override { return false; }

 private:
  std::vector<std::string> fixtures_;
};

namespace detail {
struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

inline Endpoint split_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw ConfigError("endpoint URL needs a scheme: '" + std::string(url) + "'");
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) e.base_path = std::string(url.substr(path_start));
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}
}  // namespace detail

/// OpenAI-compatible POST {endpoint}/chat/completions with one user message.
class HttpProvider : public Provider {
 public:
  std::string send(const ProviderConfig& config, const CompletionRequest& request) override {
    auto endpoint = detail::split_endpoint(config.endpoint_url);
    nlohmann::json body{{"model", config.model_name},
                        {"temperature", config.temperature},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                        {"max_tokens", config.max_output_tokens}};
    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto path = endpoint.base_path + "/chat/completions";
    const auto payload = body.dump();

    std::string last_error;
    double backoff = config.backoff_initial;
    for (int attempt = 0; attempt <= config.transport_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2.0;
      }
      httplib::Client client(endpoint.origin);
      auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::duration<double>(config.request_timeout));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw AuthError("provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw NetworkError("provider returned HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      return extract_content(res->body);
    }
    throw NetworkError("request to " + config.endpoint_url + " failed after " +
                       std::to_string(config.transport_retries + 1) + " tries: " + last_error);
  }

  static std::string extract_content(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw NetworkError(std::string("malformed provider response: ") + e.what());
    }
    const auto* content = [&]() -> const nlohmann::json* {
      if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
      const auto& choice = j["choices"][0];
      if (!choice.contains("message") || !choice["message"].contains("content")) return nullptr;
      return &choice["message"]["content"];
    }();
    if (!content || !content->is_string() || content->get<std::string>().empty()) {
      throw EmptyResponse("provider response has no message content");
    }
    return content->get<std::string>();
  }
};

struct ClientOptions {
  std::optional<std::filesystem::path> cache_dir;
  bool offline = false;
  std::size_t max_in_flight = 4;
};

/// Cached, concurrency-limited front end to one provider configuration.
class LlmClient {
 public:
  LlmClient(ProviderConfig config, std::shared_ptr<Provider> provider, ClientOptions options = {})
      : config_(std::move(config)),
        provider_(std::move(provider)),
        offline_(options.offline),
        in_flight_(std::make_unique<std::counting_semaphore<1024>>(
            static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024)))) {
    config_.check();
    if (!provider_) throw ConfigError("LlmClient needs a provider");
    if (options.cache_dir) cache_.emplace(*options.cache_dir);
  }

  /// Cached text when available, otherwise one provider round-trip whose
  /// result is persisted before it is returned.
  std::string complete(std::string_view prompt, std::size_t attempt_index, std::size_t sample_index = 0) {
    CompletionRequest request{std::string(prompt), attempt_index, sample_index};
    const auto hash = prompt_hash(config_, request);
    std::lock_guard key_lock(key_mutexes_[std::hash<std::string>{}(hash) % key_mutexes_.size()]);
    if (cache_) {
      if (auto hit = cache_->load(hash)) return hit->response_text;
    }
    if (offline_ && provider_->is_remote()) {
      throw OfflineCacheMiss("offline mode: no cached completion for " + hash.substr(0, 12) + " (model " +
                             config_.model_name + ")");
    }
    std::string text;
    {
      in_flight_->acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{*in_flight_};
      provider_calls_.fetch_add(1);
      text = provider_->send(config_, request);
    }
    if (text.empty()) throw EmptyResponse("provider returned an empty completion");
    if (cache_) {
      cache_->store(CompletionRecord{hash, config_.model_name, config_.temperature, attempt_index, sample_index,
                                     text, utc_timestamp()});
    }
    return text;
  }

  const ProviderConfig& config() const noexcept { return config_; }
  std::size_t provider_calls() const noexcept { return provider_calls_.load(); }
  bool offline() const noexcept { return offline_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<Provider> provider_;
  std::optional<ResponseCache> cache_;
  bool offline_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
  std::array<std::mutex, 64> key_mutexes_;
  std::atomic<std::size_t> provider_calls_{0};
};

struct ValidCompletion {
  std::string text;
  std::size_t attempts = 0;
};

/// Issues attempts 0..max_extra_attempts until `is_valid` accepts a response.
inline ValidCompletion complete_until_valid(LlmClient& client, std::string_view prompt,
                                            const std::function<bool(const std::string&)>& is_valid,
                                            std::size_t max_extra_attempts = 5, std::size_t sample_index = 0) {
  for (std::size_t attempt = 0; attempt <= max_extra_attempts; ++attempt) {
    auto text = client.complete(prompt, attempt, sample_index);
    if (is_valid(text)) return {std::move(text), attempt + 1};
  }
  throw ExhaustedAttempts(max_extra_attempts + 1, "every response was rejected");
}

}  // namespace zsdt
