#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "zsdt/error.hpp"
#include "zsdt/text.hpp"

namespace zsdt {

enum class FeatureKind { numeric, nominal, ordinal };

inline std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::nominal: return "nominal";
    case FeatureKind::ordinal: return "ordinal";
  }
  return "numeric";
}

inline std::optional<FeatureKind> parse_feature_kind(std::string_view s) {
  if (s == "numeric") return FeatureKind::numeric;
  if (s == "nominal") return FeatureKind::nominal;
  if (s == "ordinal") return FeatureKind::ordinal;
  return std::nullopt;
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::optional<std::string> unit;
  std::vector<std::string> categories;

  bool is_numeric_like() const noexcept { return kind != FeatureKind::nominal; }

  /// Name as used in tree text: "petal width (cm)". Names that already carry
  /// a trailing annotation are returned unchanged.
  std::string display_name() const {
    if (!unit || unit->empty() || text::strip_annotation(name) != text::trim(name)) return name;
    return name + " (" + *unit + ")";
  }

  /// Name as listed in the prompt: the unit, or for categorical features the
  /// category values, in brackets.
  std::string prompt_name() const {
    if (kind != FeatureKind::numeric && !categories.empty() && !unit) {
      return name + " (" + text::join(categories, ", ") + ")";
    }
    return display_name();
  }

  /// Index of a category, compared case-insensitively after trimming.
  std::optional<std::size_t> find_category(std::string_view value) const {
    auto key = text::fold(value);
    for (std::size_t i = 0; i < categories.size(); ++i) {
      if (text::fold(categories[i]) == key) return i;
    }
    return std::nullopt;
  }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct TargetSpec {
  std::string name;
  std::vector<std::string> labels;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

/// Named, typed features plus the target's label alphabet.
class DatasetSchema {
 public:
  DatasetSchema() = default;

  DatasetSchema(std::vector<FeatureSpec> features, TargetSpec target)
      : features_(std::move(features)), target_(std::move(target)) {
    if (target_.labels.empty()) throw SchemaError("target '" + target_.name + "' declares no labels");
    std::unordered_set<std::string> seen_labels;
    for (const auto& label : target_.labels) {
      if (text::trim(label).empty()) throw SchemaError("empty target label");
      if (!seen_labels.insert(text::fold(label)).second) {
        throw SchemaError("duplicate target label '" + label + "'");
      }
    }
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const auto& f = features_[i];
      auto key = text::feature_key(f.name);
      if (key.empty()) throw SchemaError("empty feature name");
      if (!by_key_.emplace(key, i).second) throw SchemaError("duplicate feature name '" + f.name + "'");
      if (f.kind != FeatureKind::numeric && f.categories.empty()) {
        throw SchemaError("feature '" + f.name + "' is " + std::string(to_string(f.kind)) +
                          " but declares no categories");
      }
    }
  }

  const std::vector<FeatureSpec>& features() const noexcept { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  std::size_t feature_count() const noexcept { return features_.size(); }
  const TargetSpec& target() const noexcept { return target_; }
  const std::vector<std::string>& labels() const noexcept { return target_.labels; }
  std::size_t label_count() const noexcept { return target_.labels.size(); }

  /// Feature lookup by name; units in brackets and case are ignored.
  std::optional<std::size_t> find_feature(std::string_view name) const {
    auto it = by_key_.find(text::feature_key(name));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find_label(std::string_view label) const {
    auto key = text::fold(label);
    for (std::size_t i = 0; i < target_.labels.size(); ++i) {
      if (text::fold(target_.labels[i]) == key) return i;
    }
    return std::nullopt;
  }

  std::vector<std::string> display_names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.display_name());
    return out;
  }

  friend bool operator==(const DatasetSchema& a, const DatasetSchema& b) {
    return a.features_ == b.features_ && a.target_ == b.target_;
  }

 private:
  std::vector<FeatureSpec> features_;
  TargetSpec target_;
  std::unordered_map<std::string, std::size_t> by_key_;
};

inline nlohmann::json to_json(const DatasetSchema& schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : schema.features()) {
    nlohmann::json j{{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
    if (f.unit) j["unit"] = *f.unit;
    if (!f.categories.empty()) j["categories"] = f.categories;
    features.push_back(std::move(j));
  }
  return {{"target", {{"name", schema.target().name}, {"labels", schema.labels()}}},
          {"features", std::move(features)}};
}

inline DatasetSchema schema_from_json(const nlohmann::json& j) {
  try {
    TargetSpec target;
    const auto& t = j.at("target");
    target.name = t.at("name").get<std::string>();
    target.labels = t.at("labels").get<std::vector<std::string>>();
    std::vector<FeatureSpec> features;
    for (const auto& fj : j.at("features")) {
      FeatureSpec f;
      f.name = fj.at("name").get<std::string>();
      auto kind = parse_feature_kind(fj.at("kind").get<std::string>());
      if (!kind) throw SchemaError("feature '" + f.name + "' has unknown kind");
      f.kind = *kind;
      if (fj.contains("unit")) f.unit = fj.at("unit").get<std::string>();
      if (fj.contains("categories")) f.categories = fj.at("categories").get<std::vector<std::string>>();
      features.push_back(std::move(f));
    }
    return DatasetSchema(std::move(features), std::move(target));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DatasetSchema load_schema(const std::filesystem::path& path) {
  auto content = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

}  // namespace zsdt
