#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "zsdt/embedding.hpp"
#include "zsdt/schema.hpp"
#include "zsdt/tabular.hpp"
#include "zsdt/tree.hpp"
#include "zsdt/tree_text.hpp"

namespace zsdt::fx {

inline std::filesystem::path source_dir() { return ZSDT_SOURCE_DIR; }

inline const char* k_listing_tree =
    "|- petal width (cm) <= 0.80\n"
    "| |- class: setosa\n"
    "|- petal width (cm) > 0.80\n"
    "| |- petal width (cm) <= 1.75\n"
    "| | |- class: versicolor\n"
    "| |- petal width (cm) > 1.75\n"
    "| | |- class: virginica\n";

inline DatasetSchema iris_schema() {
  std::vector<FeatureSpec> f{{"sepal length", FeatureKind::numeric, "cm", {}},
                             {"sepal width", FeatureKind::numeric, "cm", {}},
                             {"petal length", FeatureKind::numeric, "cm", {}},
                             {"petal width", FeatureKind::numeric, "cm", {}}};
  return DatasetSchema(f, {"species", {"setosa", "versicolor", "virginica"}});
}

/// Random schema: up to `max_features` features, roughly a third nominal.
inline DatasetSchema random_schema(std::mt19937_64& rng, std::size_t max_features, std::size_t max_labels = 4) {
  std::uniform_int_distribution<std::size_t> nf(1, max_features), nl(2, max_labels), nc(2, 4), coin(0, 2);
  std::vector<FeatureSpec> features;
  const auto n = nf(rng);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureSpec s;
    s.name = "feature " + std::to_string(i);
    if (coin(rng) == 0) {
      s.kind = FeatureKind::nominal;
      const auto k = nc(rng);
      for (std::size_t c = 0; c < k; ++c) s.categories.push_back("cat" + std::to_string(i) + "_" + std::to_string(c));
    } else if (coin(rng) == 0) {
      s.unit = "u" + std::to_string(i);
    }
    features.push_back(std::move(s));
  }
  TargetSpec target{"outcome", {}};
  const auto k = nl(rng);
  for (std::size_t c = 0; c < k; ++c) target.labels.push_back("label " + std::to_string(c));
  return DatasetSchema(features, target);
}

/// Random schema-conformant tree of depth <= max_depth.
inline DecisionTree random_tree(std::mt19937_64& rng, const DatasetSchema& schema, std::size_t max_depth,
                                double split_probability = 0.7) {
  std::bernoulli_distribution split(split_probability);
  std::uniform_int_distribution<std::size_t> pick_feature(0, schema.feature_count() - 1);
  std::uniform_int_distribution<std::size_t> pick_label(0, schema.label_count() - 1);
  std::uniform_int_distribution<int> pick_op(0, 5);
  std::uniform_real_distribution<double> threshold(-50.0, 150.0);
  std::function<DecisionTree(std::size_t)> grow = [&](std::size_t depth) {
    if (depth >= max_depth || !split(rng)) return DecisionTree::leaf(schema.labels()[pick_label(rng)]);
    const auto& f = schema.feature(pick_feature(rng));
    Predicate p;
    p.feature = f.display_name();
    if (f.kind == FeatureKind::nominal) {
      std::uniform_int_distribution<std::size_t> pc(0, f.categories.size() - 1);
      p.op = pick_op(rng) % 2 ? Comparator::eq : Comparator::ne;
      p.value = f.categories[pc(rng)];
    } else {
      p.op = static_cast<Comparator>(pick_op(rng));
      // mix of short decimals and arbitrary doubles
      double t = threshold(rng);
      if (pick_op(rng) < 3) t = std::round(t * 100.0) / 100.0;
      p.value = t;
    }
    auto t = grow(depth + 1);
    auto e = grow(depth + 1);
    return DecisionTree::split(p, t, e);
  };
  return grow(0);
}

/// Random complete row for `schema`: numeric values in [-60, 160], nominal
/// values drawn from the categories.
inline std::vector<Value> random_row(std::mt19937_64& rng, const DatasetSchema& schema) {
  std::uniform_real_distribution<double> u(-60.0, 160.0);
  std::vector<Value> row;
  for (const auto& f : schema.features()) {
    if (f.kind == FeatureKind::nominal) {
      std::uniform_int_distribution<std::size_t> pc(0, f.categories.size() - 1);
      row.emplace_back(f.categories[pc(rng)]);
    } else {
      row.emplace_back(u(rng));
    }
  }
  return row;
}

inline Sample make_sample(const DatasetSchema& schema, std::vector<Value> row) {
  return Sample(std::make_shared<const FeatureIndex>(schema.display_names()), std::move(row));
}

/// Dataset of `n` rows with every label present at least `min_per_class`
/// times, then a fraction `missing` of feature cells blanked.
inline Dataset random_dataset(std::mt19937_64& rng, std::shared_ptr<const DatasetSchema> schema, std::size_t n,
                              double missing = 0.0, std::size_t min_per_class = 1) {
  std::vector<std::vector<Value>> rows;
  std::vector<std::size_t> targets;
  std::uniform_int_distribution<std::size_t> pl(0, schema->label_count() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(random_row(rng, *schema));
    targets.push_back(i < schema->label_count() * min_per_class ? i % schema->label_count() : pl(rng));
  }
  std::bernoulli_distribution blank(missing);
  for (auto& row : rows) {
    for (auto& v : row) {
      if (blank(rng)) v = std::monostate{};
    }
  }
  return Dataset(std::move(schema), std::move(rows), std::move(targets));
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Label reached by nested conditionals on the pointer form of the tree.
inline std::string oracle_predict(const DecisionTree& tree, const Sample& s, std::size_t node = 0) {
  const auto& n = tree.node(node);
  if (const auto* leaf = std::get_if<DecisionTree::Leaf>(&n)) return leaf->label;
  const auto& split = std::get<DecisionTree::Split>(n);
  return oracle_predict(tree, s, split.predicate.holds(s.at(split.predicate.feature)) ? split.true_child
                                                                                         : split.false_child);
}

/// Per-class precision/recall/F1 straight from raw label lists.
struct MetricOracle {
  double macro_f1 = 0.0;
  double balanced_accuracy = 0.0;
};

inline MetricOracle metric_oracle(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                                  std::size_t n_classes) {
  MetricOracle out;
  double f1_sum = 0.0, recall_sum = 0.0;
  std::size_t classes_with_support = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c && pred[i] == c) ++tp;
      if (truth[i] != c && pred[i] == c) ++fp;
      if (truth[i] == c && pred[i] != c) ++fn;
    }
    const double precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    f1_sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    if (tp + fn) {
      recall_sum += recall;
      ++classes_with_support;
    }
  }
  out.macro_f1 = f1_sum / double(n_classes);
  out.balanced_accuracy = classes_with_support ? recall_sum / double(classes_with_support) : 0.0;
  return out;
}

/// kNN imputation recomputed by brute force: for each missing cell, sort all
/// training rows observing that column by (distance, index), average or take
/// the mode of the first k.
inline std::vector<std::vector<Value>> knn_oracle(const Dataset& train, const Dataset& target, std::size_t k) {
  const auto& schema = train.schema();
  const auto m = schema.feature_count();
  std::vector<double> lo(m, std::numeric_limits<double>::infinity()), hi(m, -std::numeric_limits<double>::infinity());
  for (const auto& row : train.rows()) {
    for (std::size_t c = 0; c < m; ++c) {
      if (const auto* d = std::get_if<double>(&row[c])) {
        lo[c] = std::min(lo[c], *d);
        hi[c] = std::max(hi[c], *d);
      }
    }
  }
  auto norm = [&](std::size_t c, double v) { return hi[c] > lo[c] ? (v - lo[c]) / (hi[c] - lo[c]) : 0.0; };
  auto dist = [&](const std::vector<Value>& a, const std::vector<Value>& b) {
    double s = 0.0;
    std::size_t shared = 0;
    for (std::size_t c = 0; c < m; ++c) {
      if (!schema.feature(c).is_numeric_like()) continue;
      const auto* x = std::get_if<double>(&a[c]);
      const auto* y = std::get_if<double>(&b[c]);
      if (!x || !y) continue;
      const double d = norm(c, *x) - norm(c, *y);
      s += d * d;
      ++shared;
    }
    return shared ? std::sqrt(s) : std::numeric_limits<double>::infinity();
  };
  std::vector<std::vector<Value>> out = target.rows();
  for (auto& row : out) {
    const auto query = row;
    for (std::size_t c = 0; c < m; ++c) {
      if (!is_missing(query[c])) continue;
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t t = 0; t < train.size(); ++t) {
        if (!is_missing(train.row(t)[c])) cand.push_back({dist(query, train.row(t)), t});
      }
      std::sort(cand.begin(), cand.end());
      cand.resize(std::min(k, cand.size()));
      const auto& spec = schema.feature(c);
      if (spec.kind == FeatureKind::nominal) {
        std::vector<std::size_t> votes(spec.categories.size(), 0);
        for (auto [d, t] : cand) ++votes[*spec.find_category(std::get<std::string>(train.row(t)[c]))];
        std::size_t best = 0;
        for (std::size_t i = 1; i < votes.size(); ++i) {
          if (votes[i] > votes[best]) best = i;
        }
        row[c] = spec.categories[best];
      } else {
        double sum = 0.0;
        for (auto [d, t] : cand) sum += std::get<double>(train.row(t)[c]);
        row[c] = sum / double(cand.size());
      }
    }
  }
  return out;
}

}  // namespace zsdt::fx
