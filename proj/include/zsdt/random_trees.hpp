#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "zsdt/embedding.hpp"
#include "zsdt/rng.hpp"
#include "zsdt/tabular.hpp"

namespace zsdt {

struct RandomTreesConfig {
  std::size_t n_trees = 5;
  std::size_t max_depth = 5;
  std::uint64_t seed = 0;
};

namespace detail {

struct RandomTreeBuilder {
  const Dataset& data;
  const RandomTreesConfig& config;
  std::mt19937_64 rng;

  // Features that take at least two distinct values on `rows`.
  std::vector<std::size_t> splittable(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < data.schema().feature_count(); ++f) {
      const Value* first = nullptr;
      for (auto r : rows) {
        const auto& v = data.row(r)[f];
        if (is_missing(v)) throw MissingValue("random_trees_embedding needs imputed data");
        if (!first) {
          first = &v;
        } else if (v != *first) {
          out.push_back(f);
          break;
        }
      }
    }
    return out;
  }

  DecisionTree grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const auto& leaf_label = data.schema().labels().front();
    if (depth >= config.max_depth || rows.size() < 2) return DecisionTree::leaf(leaf_label);
    auto candidates = splittable(rows);
    if (candidates.empty()) return DecisionTree::leaf(leaf_label);
    std::uniform_int_distribution<std::size_t> pick_feature(0, candidates.size() - 1);
    const std::size_t f = candidates[pick_feature(rng)];
    const auto& spec = data.schema().feature(f);

    Predicate p;
    p.feature = spec.display_name();
    if (spec.kind == FeatureKind::nominal) {
      std::vector<std::string> seen;
      for (const auto& c : spec.categories) {
        for (auto r : rows) {
          if (std::get<std::string>(data.row(r)[f]) == c) {
            seen.push_back(c);
            break;
          }
        }
      }
      std::uniform_int_distribution<std::size_t> pick(0, seen.size() - 1);
      p.op = Comparator::eq;
      p.value = seen[pick(rng)];
    } else {
      double lo = std::get<double>(data.row(rows.front())[f]);
      double hi = lo;
      for (auto r : rows) {
        const double v = std::get<double>(data.row(r)[f]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      std::uniform_real_distribution<double> u(lo, hi);
      p.op = Comparator::le;
      double t = u(rng);
      if (!(t < hi)) t = lo;  // keep both sides nonempty
      p.value = t;
    }

    std::vector<std::size_t> yes, no;
    for (auto r : rows) (p.holds(data.row(r)[f]) ? yes : no).push_back(r);
    return DecisionTree::split(p, grow(yes, depth + 1), grow(no, depth + 1));
  }
};

}  // namespace detail

/// Unsupervised random-split forest over the training rows. Targets are never
/// read; every leaf carries the first schema label as a placeholder.
inline ZeroShotForest random_trees_embedding(const Dataset& train, const RandomTreesConfig& config = {}) {
  if (train.empty()) throw TooFewSamples("random_trees_embedding on an empty dataset");
  if (config.n_trees == 0) throw ConfigError("n_trees must be positive");
  std::vector<std::size_t> rows(train.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  ZeroShotForest forest;
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    detail::RandomTreeBuilder builder{train, config, std::mt19937_64(derive_seed(config.seed, {t}))};
    forest.trees.push_back(builder.grow(rows, 0));
    forest.provenance.push_back({"random_trees", 0, {}});
  }
  return forest;
}

}  // namespace zsdt
