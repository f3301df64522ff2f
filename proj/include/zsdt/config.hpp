#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zsdt/embedding.hpp"
#include "zsdt/error.hpp"
#include "zsdt/llm_client.hpp"
#include "zsdt/mlp.hpp"
#include "zsdt/text.hpp"

namespace zsdt {

// ---------------------------------------------------------------------------
// TOML subset: comments, bare keys, basic and literal strings, integers,
// floats, booleans, arrays of scalars (may span lines), [table] and
// [[array-of-tables]] headers. Parsed into a JSON object.
// ---------------------------------------------------------------------------

namespace toml_detail {

class ValueParser {
 public:
  ValueParser(std::string_view src, std::size_t line) : s_(src), line_(line) {}

  nlohmann::json parse_value() {
    skip_ws();
    if (eof()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_bare();
  }

  void expect_end() {
    skip_ws();
    if (!eof() && s_[pos_] != '#') fail("unexpected trailing text");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }
  bool eof() const { return pos_ >= s_.size(); }

  void skip_ws(bool newlines = false) {
    while (!eof()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || (newlines && (c == '\n' || c == '\r'))) {
        ++pos_;
      } else if (newlines && c == '#') {
        while (!eof() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  nlohmann::json parse_basic_string() {
    ++pos_;
    std::string out;
    while (!eof() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (eof()) fail("bad escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    if (eof()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json parse_literal_string() {
    ++pos_;
    const auto end = s_.find('\'', pos_);
    if (end == std::string_view::npos || s_.substr(pos_, end - pos_).find('\n') != std::string_view::npos) {
      fail("unterminated string");
    }
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  nlohmann::json parse_array() {
    ++pos_;
    auto arr = nlohmann::json::array();
    for (;;) {
      skip_ws(true);
      if (eof()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws(true);
      if (eof()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
      } else if (s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  nlohmann::json parse_bare() {
    const auto start = pos_;
    while (!eof() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != '\n' &&
           !text::is_space(s_[pos_])) {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits += c;
    }
    const bool integral = !digits.empty() && digits.find_first_of(".eE") == std::string::npos &&
                          digits != "inf" && digits != "nan";
    if (integral) {
      std::int64_t v = 0;
      const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc{} && p == digits.data() + digits.size()) return v;
    }
    if (auto d = text::parse_number(digits)) return *d;
    fail("cannot read value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

inline int bracket_balance(std::string_view s) {
  int depth = 0;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
      continue;
    }
    if (c == '#') break;
    if (c == '"' || c == '\'') quote = c;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

}  // namespace toml_detail

inline nlohmann::json parse_toml(std::string_view content) {
  auto root = nlohmann::json::object();
  nlohmann::json* table = &root;
  const auto lines = text::split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = text::trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    auto fail = [line_no](const std::string& what) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (line.front() == '[') {
      const bool array_table = line.starts_with("[[");
      const auto close = line.find(array_table ? "]]" : "]");
      if (close == std::string_view::npos) fail("unterminated table header");
      auto rest = text::trim(line.substr(close + (array_table ? 2 : 1)));
      if (!rest.empty() && rest.front() != '#') fail("unexpected text after table header");
      std::string name(text::trim(line.substr(array_table ? 2 : 1, close - (array_table ? 2 : 1))));
      if (!toml_detail::valid_key(name)) fail("bad table name '" + name + "'");
      if (array_table) {
        auto& arr = root[name];
        if (arr.is_null()) arr = nlohmann::json::array();
        if (!arr.is_array()) fail("'" + name + "' is not an array of tables");
        arr.push_back(nlohmann::json::object());
        table = &arr.back();
      } else {
        if (root.contains(name)) fail("table '" + name + "' defined twice");
        root[name] = nlohmann::json::object();
        table = &root[name];
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    if (!toml_detail::valid_key(key)) fail("bad key '" + key + "'");
    if (table->contains(key)) fail("duplicate key '" + key + "'");
    std::string value(line.substr(eq + 1));
    std::size_t last = i;
    while (toml_detail::bracket_balance(value) > 0 && last + 1 < lines.size()) {
      value += "\n" + lines[++last];
    }
    toml_detail::ValueParser parser(value, line_no);
    (*table)[key] = parser.parse_value();
    parser.expect_end();
    i = last;
  }
  return root;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class ExperimentMode { induction, embedding };

inline std::string_view to_string(ExperimentMode m) noexcept {
  return m == ExperimentMode::induction ? "induction" : "embedding";
}

struct DatasetEntry {
  std::string name;
  std::filesystem::path csv;
  std::filesystem::path schema;
  std::string target_description;  // empty: the schema's target name
};

enum class ProviderKind { http, fixture };

struct ProviderEntry {
  std::string name;
  ProviderKind kind = ProviderKind::http;
  ProviderConfig config;
  std::filesystem::path fixtures;  // fixture kind: {fixtures}/{dataset}/*.txt
  std::size_t max_in_flight = 4;
};

struct InductionParams {
  std::optional<std::size_t> depth = 2;
  double temperature = 0.0;
  std::size_t max_extra_attempts = 5;
  bool repair = true;
  std::size_t trees = 5;
};

struct EmbeddingParams {
  std::size_t trees = 5;
  AugmentMode mode = AugmentMode::extend;
  double temperature = 1.0;
  std::optional<std::size_t> depth;  // unconstrained
  std::size_t max_extra_attempts = 5;
  bool repair = true;
  MlpConfig mlp;
  std::vector<std::size_t> hidden_sizes = default_hidden_sizes();
  std::vector<double> l2_strengths = default_l2_strengths();
  std::size_t folds = 3;
  bool random_trees = true;
  std::size_t random_trees_depth = 5;
};

struct SplitParams {
  std::vector<double> fractions{0.67};
  std::size_t repeats = 5;
  bool stratify = true;
};

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::induction;
  std::vector<DatasetEntry> datasets;
  std::vector<ProviderEntry> providers;
  InductionParams induction;
  EmbeddingParams embedding;
  SplitParams splits;
  std::uint64_t seed = 0;
  std::size_t knn_k = 10;
  std::optional<std::filesystem::path> cache_dir;
  bool offline = false;
  std::size_t workers = 1;
  std::filesystem::path base_dir = ".";

  void check() const {
    if (splits.fractions.empty()) throw ConfigError("no split fractions");
    for (double f : splits.fractions) {
      if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    }
    if (splits.repeats == 0) throw ConfigError("splits.repeats must be positive");
    if (induction.trees == 0 || embedding.trees == 0) throw ConfigError("tree count must be positive");
    if (embedding.folds < 2) throw ConfigError("embedding.folds must be at least 2");
    if (embedding.hidden_sizes.empty() || embedding.l2_strengths.empty()) throw ConfigError("empty MLP grid");
    if (knn_k == 0) throw ConfigError("knn_k must be positive");
    for (double t : {induction.temperature, embedding.temperature}) {
      if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
    }
    std::set<std::string> names;
    for (const auto& d : datasets) {
      if (!names.insert(d.name).second) throw ConfigError("duplicate dataset '" + d.name + "'");
    }
    names.clear();
    for (const auto& p : providers) {
      if (!names.insert(p.name).second) throw ConfigError("duplicate provider '" + p.name + "'");
      if (p.name == "mlp" || p.name == "random_trees" || p.name == "greedy_tree") {
        throw ConfigError("provider name '" + p.name + "' is reserved for a baseline method");
      }
      if (p.kind == ProviderKind::http) p.config.check();
      if (p.max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    }
  }
};

namespace config_detail {

class Reader {
 public:
  Reader(const nlohmann::json& table, std::string where) : t_(table), where_(std::move(where)) {
    if (!t_.is_object()) throw ConfigError(where_ + " must be a table");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = t_.begin(); it != t_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where_);
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return t_.contains(key);
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return t_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(t_.at(key), key);
  }

  std::string required_string(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + " needs '" + key + "'");
    return convert<std::string>(t_.at(key), key);
  }

  /// Depth: a positive integer, or 0 / "none" for unconstrained.
  void get_depth(const std::string& key, std::optional<std::size_t>& out) {
    if (!has(key)) return;
    const auto& v = t_.at(key);
    if (v.is_string() && text::fold(v.get<std::string>()) == "none") {
      out.reset();
      return;
    }
    auto d = convert<std::size_t>(v, key);
    out = d == 0 ? std::nullopt : std::optional<std::size_t>(d);
  }

  template <class T>
  T convert(const nlohmann::json& v, const std::string& key) const {
    auto bad = [&](const char* want) { return ConfigError(where_ + "." + key + " must be " + want); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw bad("a non-negative integer");
      return static_cast<T>(v.get<std::int64_t>());
    } else {
      if (!v.is_array()) throw bad("an array");
      T out;
      for (const auto& e : v) out.push_back(convert<typename T::value_type>(e, key));
      return out;
    }
  }

 private:
  const nlohmann::json& t_;
  std::string where_;
  std::set<std::string> seen_;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace config_detail

/// Builds a config from a parsed document; relative paths resolve against
/// `base_dir`.
inline ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  using config_detail::Reader;
  using config_detail::resolve;
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  {
    Reader top(doc, "config");
    if (top.has("mode")) {
      auto m = top.convert<std::string>(top.raw("mode"), "mode");
      if (m == "induction") {
        cfg.mode = ExperimentMode::induction;
      } else if (m == "embedding") {
        cfg.mode = ExperimentMode::embedding;
      } else {
        throw ConfigError("mode must be 'induction' or 'embedding'");
      }
    }
    top.get("seed", cfg.seed);
    top.get("knn_k", cfg.knn_k);
    top.get("offline", cfg.offline);
    top.get("workers", cfg.workers);
    if (top.has("cache_dir")) cfg.cache_dir = resolve(base_dir, top.convert<std::string>(top.raw("cache_dir"), "cache_dir"));

    if (top.has("induction")) {
      Reader r(top.raw("induction"), "[induction]");
      r.get_depth("depth", cfg.induction.depth);
      r.get("temperature", cfg.induction.temperature);
      r.get("max_extra_attempts", cfg.induction.max_extra_attempts);
      r.get("repair", cfg.induction.repair);
      r.get("trees", cfg.induction.trees);
    }
    if (top.has("embedding")) {
      Reader r(top.raw("embedding"), "[embedding]");
      auto& e = cfg.embedding;
      r.get("trees", e.trees);
      if (r.has("mode")) {
        auto m = parse_augment_mode(r.convert<std::string>(r.raw("mode"), "mode"));
        if (!m) throw ConfigError("[embedding].mode must be 'extend' or 'replace'");
        e.mode = *m;
      }
      r.get("temperature", e.temperature);
      r.get_depth("depth", e.depth);
      r.get("max_extra_attempts", e.max_extra_attempts);
      r.get("repair", e.repair);
      r.get("hidden_sizes", e.hidden_sizes);
      r.get("l2_strengths", e.l2_strengths);
      r.get("learning_rate", e.mlp.learning_rate);
      r.get("max_epochs", e.mlp.max_epochs);
      r.get("folds", e.folds);
      r.get("random_trees", e.random_trees);
      r.get("random_trees_depth", e.random_trees_depth);
      if (r.has("model")) {
        if (r.convert<std::string>(r.raw("model"), "model") != "mlp") {
          throw ConfigError("[embedding].model supports only 'mlp'");
        }
      }
    }
    if (top.has("splits")) {
      Reader r(top.raw("splits"), "[splits]");
      r.get("fractions", cfg.splits.fractions);
      r.get("repeats", cfg.splits.repeats);
      r.get("stratify", cfg.splits.stratify);
    }
    if (top.has("datasets")) {
      const auto& arr = top.raw("datasets");
      if (!arr.is_array()) throw ConfigError("datasets must be [[datasets]] tables");
      for (const auto& t : arr) {
        Reader r(t, "[[datasets]]");
        DatasetEntry d;
        d.name = r.required_string("name");
        d.csv = resolve(base_dir, r.required_string("csv"));
        d.schema = resolve(base_dir, r.required_string("schema"));
        r.get("target_description", d.target_description);
        cfg.datasets.push_back(std::move(d));
      }
    }
    if (top.has("providers")) {
      const auto& arr = top.raw("providers");
      if (!arr.is_array()) throw ConfigError("providers must be [[providers]] tables");
      for (const auto& t : arr) {
        Reader r(t, "[[providers]]");
        ProviderEntry p;
        p.name = r.required_string("name");
        std::string kind = "http";
        r.get("kind", kind);
        if (kind == "http") {
          p.kind = ProviderKind::http;
        } else if (kind == "fixture") {
          p.kind = ProviderKind::fixture;
          p.fixtures = resolve(base_dir, r.required_string("fixtures"));
        } else {
          throw ConfigError("provider kind must be 'http' or 'fixture'");
        }
        r.get("model", p.config.model_name);
        r.get("endpoint", p.config.endpoint_url);
        r.get("api_key_env", p.config.api_key_env);
        r.get("max_output_tokens", p.config.max_output_tokens);
        r.get("request_timeout", p.config.request_timeout);
        r.get("transport_retries", p.config.transport_retries);
        r.get("max_in_flight", p.max_in_flight);
        if (p.config.model_name.empty()) p.config.model_name = p.name;
        cfg.providers.push_back(std::move(p));
      }
    }
  }
  cfg.check();
  return cfg;
}

inline ExperimentConfig parse_config(std::string_view content, const std::filesystem::path& base_dir = ".") {
  return config_from_json(parse_toml(content), base_dir);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace zsdt
