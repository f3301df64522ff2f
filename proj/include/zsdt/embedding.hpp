#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "zsdt/error.hpp"
#include "zsdt/induction.hpp"
#include "zsdt/tabular.hpp"
#include "zsdt/tree.hpp"

namespace zsdt {

struct TreeProvenance {
  std::string provider;
  std::size_t attempts_used = 0;
  std::string raw_text;
};

/// Ordered trees whose truth vectors are concatenated into one embedding.
struct ZeroShotForest {
  std::vector<DecisionTree> trees;
  std::vector<TreeProvenance> provenance;  // empty or one entry per tree

  std::size_t size() const noexcept { return trees.size(); }

  std::size_t total_inner_nodes() const noexcept {
    std::size_t n = 0;
    for (const auto& t : trees) n += t.inner_node_count();
    return n;
  }

  /// Segment start offsets plus the total length (size() + 1 entries).
  std::vector<std::size_t> offsets() const {
    std::vector<std::size_t> out{0};
    for (const auto& t : trees) out.push_back(out.back() + t.inner_node_count());
    return out;
  }
};

struct EmbeddingVector {
  std::vector<std::uint8_t> bits;
  std::vector<std::size_t> offsets;  // segment i is [offsets[i], offsets[i+1])

  std::span<const std::uint8_t> segment(std::size_t i) const {
    return std::span<const std::uint8_t>(bits).subspan(offsets.at(i), offsets.at(i + 1) - offsets.at(i));
  }
  std::size_t size() const noexcept { return bits.size(); }
};

/// Induces `m` trees, one draw per sample index first_sample_index + t. Any
/// exhausted member aborts the forest.
inline ZeroShotForest sample_forest(const PromptSpec& spec, const DatasetSchema& schema, LlmClient& client,
                                    std::size_t m = 5, const InductionOptions& options = {},
                                    std::size_t first_sample_index = 0,
                                    const PromptTemplates& templates = default_templates()) {
  if (m == 0) throw ConfigError("a forest needs at least one tree");
  ZeroShotForest forest;
  for (std::size_t t = 0; t < m; ++t) {
    auto induced = induce_tree(spec, schema, client, options, first_sample_index + t, templates);
    forest.trees.push_back(induced.tree);
    forest.provenance.push_back({induced.provider, induced.attempts_used, induced.raw_text});
  }
  return forest;
}

inline EmbeddingVector embed(const ZeroShotForest& forest, const Sample& sample) {
  EmbeddingVector out;
  out.offsets = forest.offsets();
  out.bits.reserve(out.offsets.back());
  for (const auto& tree : forest.trees) {
    auto tv = truth_vector(tree, sample);
    out.bits.insert(out.bits.end(), tv.begin(), tv.end());
  }
  return out;
}

/// emb_{tree}_{node}, both 0-based, node in pre-order.
inline std::vector<std::string> embedding_column_names(const ZeroShotForest& forest) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    for (std::size_t n = 0; n < forest.trees[t].inner_node_count(); ++n) {
      names.push_back("emb_" + std::to_string(t) + "_" + std::to_string(n));
    }
  }
  return names;
}

/// Embeds every row of a dataset (raw, imputed values).
inline Eigen::MatrixXd embedding_matrix(const ZeroShotForest& forest, const Dataset& raw) {
  const auto width = static_cast<Eigen::Index>(forest.total_inner_nodes());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(raw.size()), width);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    auto e = embed(forest, raw.sample(r));
    for (Eigen::Index j = 0; j < width; ++j) m(static_cast<Eigen::Index>(r), j) = e.bits[static_cast<std::size_t>(j)];
  }
  return m;
}

enum class AugmentMode { extend, replace };

inline std::string_view to_string(AugmentMode mode) noexcept {
  return mode == AugmentMode::extend ? "extend" : "replace";
}

inline std::optional<AugmentMode> parse_augment_mode(std::string_view s) noexcept {
  if (s == "extend") return AugmentMode::extend;
  if (s == "replace") return AugmentMode::replace;
  return std::nullopt;
}

/// Appends (extend) or substitutes (replace) the embedding bits of `raw`'s
/// rows; `design` and `raw` must describe the same rows in the same order.
inline DesignMatrix augment(const DesignMatrix& design, const Dataset& raw, const ZeroShotForest& forest,
                            AugmentMode mode) {
  if (design.rows() != raw.size()) {
    throw DimensionMismatch("design matrix has " + std::to_string(design.rows()) + " rows, dataset has " +
                            std::to_string(raw.size()));
  }
  Eigen::MatrixXd bits = embedding_matrix(forest, raw);
  auto names = embedding_column_names(forest);
  DesignMatrix out;
  if (mode == AugmentMode::replace) {
    out.values = std::move(bits);
    out.columns = std::move(names);
    return out;
  }
  out.values.resize(design.values.rows(), design.values.cols() + bits.cols());
  out.values.leftCols(design.values.cols()) = design.values;
  out.values.rightCols(bits.cols()) = bits;
  out.columns = design.columns;
  out.columns.insert(out.columns.end(), names.begin(), names.end());
  return out;
}

inline nlohmann::json to_json(const ZeroShotForest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees) trees.push_back(to_json(t));
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& p : forest.provenance) {
    prov.push_back({{"provider", p.provider}, {"attempts_used", p.attempts_used}, {"raw_text", p.raw_text}});
  }
  return {{"trees", std::move(trees)}, {"provenance", std::move(prov)}};
}

/// Accepts the object form written by to_json or a bare array of trees.
inline ZeroShotForest forest_from_json(const nlohmann::json& j) {
  ZeroShotForest forest;
  const nlohmann::json* trees = &j;
  if (j.is_object()) {
    if (!j.contains("trees")) throw SchemaError("forest JSON needs 'trees'");
    trees = &j.at("trees");
    if (j.contains("provenance")) {
      for (const auto& p : j.at("provenance")) {
        forest.provenance.push_back({p.value("provider", std::string{}), p.value("attempts_used", std::size_t{0}),
                                     p.value("raw_text", std::string{})});
      }
    }
  }
  if (!trees->is_array()) throw SchemaError("forest JSON 'trees' must be an array");
  for (const auto& t : *trees) forest.trees.push_back(tree_from_json(t));
  if (!forest.provenance.empty() && forest.provenance.size() != forest.trees.size()) {
    throw SchemaError("forest provenance does not match its trees");
  }
  return forest;
}

/// Dataset CSV with one extra column per embedding bit.
inline std::string embedding_to_csv(const Dataset& raw, const ZeroShotForest& forest) {
  auto base = text::split_lines(to_csv(raw));
  auto names = embedding_column_names(forest);
  std::string out = base.front();
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < raw.size(); ++r) {
    out += base[r + 1];
    for (auto b : embed(forest, raw.sample(r)).bits) out += b ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

}  // namespace zsdt
