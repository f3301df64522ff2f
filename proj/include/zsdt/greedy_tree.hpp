#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "zsdt/tabular.hpp"
#include "zsdt/tree.hpp"

namespace zsdt {

struct GreedyTreeConfig {
  std::size_t max_depth = 2;
  std::size_t min_samples_leaf = 1;
};

inline const std::vector<std::size_t>& default_greedy_depths() {
  static const std::vector<std::size_t> depths{1, 2};
  return depths;
}

/// Gini impurity 1 - sum p_c^2 of a class histogram.
inline double gini(const std::vector<std::size_t>& counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

struct SplitCandidate {
  std::size_t feature = 0;
  Predicate predicate;
  double gain = 0.0;
  std::vector<std::size_t> true_rows;
  std::vector<std::size_t> false_rows;
};

namespace detail {

inline double numeric_cell(const Value& v) {
  if (is_missing(v)) throw MissingValue("greedy_tree_fit needs imputed data");
  return std::get<double>(v);
}

inline std::vector<std::size_t> class_counts(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> counts(data.schema().label_count(), 0);
  for (auto r : rows) ++counts[data.targets()[r]];
  return counts;
}

inline double split_gain(double parent_impurity, std::size_t n, const std::vector<std::size_t>& left,
                         std::size_t n_left, const std::vector<std::size_t>& right, std::size_t n_right) {
  const double dn = static_cast<double>(n);
  return parent_impurity - (static_cast<double>(n_left) / dn) * gini(left) -
         (static_cast<double>(n_right) / dn) * gini(right);
}

}  // namespace detail

/// Every admissible split of `rows` in enumeration order: features in schema
/// order; numeric/ordinal "<=" at midpoints of sorted unique values
/// (ascending); nominal "==" per observed category in schema order.
inline std::vector<SplitCandidate> enumerate_splits(const Dataset& data, const std::vector<std::size_t>& rows,
                                                    std::size_t min_samples_leaf = 1) {
  std::vector<SplitCandidate> out;
  const auto& schema = data.schema();
  const auto parent = detail::class_counts(data, rows);
  const double parent_impurity = gini(parent);
  const std::size_t n = rows.size();
  const std::size_t k = schema.label_count();

  for (std::size_t f = 0; f < schema.feature_count(); ++f) {
    const auto& spec = schema.feature(f);
    const std::string name = spec.display_name();
    if (spec.kind == FeatureKind::nominal) {
      for (const auto& category : spec.categories) {
        SplitCandidate c;
        c.feature = f;
        c.predicate = {name, Comparator::eq, category};
        std::vector<std::size_t> left(k, 0), right(k, 0);
        for (auto r : rows) {
          const auto& v = data.row(r)[f];
          if (is_missing(v)) throw MissingValue("greedy_tree_fit needs imputed data");
          if (c.predicate.holds(v)) {
            c.true_rows.push_back(r);
            ++left[data.targets()[r]];
          } else {
            c.false_rows.push_back(r);
            ++right[data.targets()[r]];
          }
        }
        if (c.true_rows.size() < min_samples_leaf || c.false_rows.size() < min_samples_leaf) continue;
        c.gain = detail::split_gain(parent_impurity, n, left, c.true_rows.size(), right, c.false_rows.size());
        out.push_back(std::move(c));
      }
      continue;
    }
    std::vector<std::size_t> order = rows;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return detail::numeric_cell(data.row(a)[f]) < detail::numeric_cell(data.row(b)[f]);
    });
    std::vector<std::size_t> left(k, 0), right = parent;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const auto y = data.targets()[order[i]];
      ++left[y];
      --right[y];
      const double a = detail::numeric_cell(data.row(order[i])[f]);
      const double b = detail::numeric_cell(data.row(order[i + 1])[f]);
      if (!(a < b)) continue;
      const std::size_t n_left = i + 1;
      if (n_left < min_samples_leaf || n - n_left < min_samples_leaf) continue;
      double t = a + (b - a) / 2.0;
      if (!(t < b)) t = a;  // adjacent doubles
      SplitCandidate c;
      c.feature = f;
      c.predicate = {name, Comparator::le, t};
      c.true_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_left));
      c.false_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_left), order.end());
      std::sort(c.true_rows.begin(), c.true_rows.end());
      std::sort(c.false_rows.begin(), c.false_rows.end());
      c.gain = detail::split_gain(parent_impurity, n, left, n_left, right, n - n_left);
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Highest Gini gain; ties keep the earliest candidate.
inline std::optional<SplitCandidate> best_split(const Dataset& data, const std::vector<std::size_t>& rows,
                                                std::size_t min_samples_leaf = 1) {
  auto all = enumerate_splits(data, rows, min_samples_leaf);
  if (all.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].gain > all[best].gain) best = i;
  }
  return std::move(all[best]);
}

namespace detail {

inline std::size_t majority(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

inline DecisionTree grow(const Dataset& data, const std::vector<std::size_t>& rows, std::size_t depth,
                         const GreedyTreeConfig& config) {
  const auto counts = class_counts(data, rows);
  const auto& label = data.schema().labels()[majority(counts)];
  const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
  if (pure || depth >= config.max_depth) return DecisionTree::leaf(label);
  auto split = best_split(data, rows, config.min_samples_leaf);
  if (!split) return DecisionTree::leaf(label);
  return DecisionTree::split(split->predicate, grow(data, split->true_rows, depth + 1, config),
                             grow(data, split->false_rows, depth + 1, config));
}

}  // namespace detail

/// Top-down CART-style induction on imputed data. Leaves carry the majority
/// label (ties to the lowest label index).
inline DecisionTree greedy_tree_fit(const Dataset& data, const GreedyTreeConfig& config = {}) {
  if (data.empty()) throw TooFewSamples("greedy_tree_fit on an empty dataset");
  if (config.min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be positive");
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return detail::grow(data, rows, 0, config);
}

inline std::vector<std::size_t> predict_indices(const DecisionTree& tree, const Dataset& data) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& label = predict(tree, data.sample(r));
    auto idx = data.schema().find_label(label);
    if (!idx) throw SchemaError("tree predicts unknown label '" + label + "'");
    out.push_back(*idx);
  }
  return out;
}

}  // namespace zsdt
