#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "zsdt/error.hpp"
#include "zsdt/metrics.hpp"
#include "zsdt/mlp.hpp"
#include "zsdt/rng.hpp"

namespace zsdt {

/// Validation index sets of a stratified k-fold partition. Members of each
/// class are shuffled, then dealt round-robin with a cursor carried across
/// classes so fold sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<std::size_t>& y,
                                                              std::size_t n_classes, std::size_t folds,
                                                              std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= n_classes) throw DimensionMismatch("label index out of range");
    by_class[y[i]].push_back(i);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < folds) {
      throw TooFewSamples("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                          " samples, fewer than " + std::to_string(folds) + " folds");
    }
  }
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::mt19937_64 rng(derive_seed(seed, {0xF01D, c}));
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    for (auto i : by_class[c]) out[cursor++ % folds].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

/// Complement of a validation set within [0, n).
inline std::vector<std::size_t> complement_indices(const std::vector<std::size_t>& held_out, std::size_t n) {
  std::vector<bool> mask(n, false);
  for (auto i : held_out) mask[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) out.push_back(i);
  }
  return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

template <class Config>
struct GridResult {
  std::size_t best_index = 0;
  Config best{};
  double best_score = 0.0;
  std::vector<double> scores;                    // mean validation macro-F1 per config
  std::vector<std::vector<double>> fold_scores;  // [config][fold]
};

struct CvOptions {
  std::size_t folds = 3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

/// Scores every (config, fold) cell with `evaluate(train_idx, val_idx, config)`
/// returning predicted label indices for val_idx. Cells may run on several
/// threads; results do not depend on the thread count.
template <class Config, class Evaluate>
GridResult<Config> cv_grid_search_indexed(const std::vector<std::size_t>& y, std::size_t n_classes,
                                          const std::vector<Config>& grid, Evaluate&& evaluate,
                                          const CvOptions& options = {}) {
  if (grid.empty()) throw ConfigError("empty hyperparameter grid");
  const auto folds = stratified_folds(y, n_classes, options.folds, options.seed);
  std::vector<std::vector<std::size_t>> train_sets;
  for (const auto& f : folds) train_sets.push_back(complement_indices(f, y.size()));

  GridResult<Config> result;
  result.fold_scores.assign(grid.size(), std::vector<double>(folds.size(), 0.0));
  const std::size_t cells = grid.size() * folds.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t cell = next++; cell < cells; cell = next++) {
      const std::size_t g = cell / folds.size();
      const std::size_t f = cell % folds.size();
      try {
        auto predicted = evaluate(train_sets[f], folds[f], grid[g]);
        result.fold_scores[g][f] = macro_f1(ConfusionMatrix::from_labels(take(y, folds[f]), predicted, n_classes));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.threads, cells));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& fs : result.fold_scores) {
    double sum = 0.0;
    for (double s : fs) sum += s;
    result.scores.push_back(sum / static_cast<double>(fs.size()));
  }
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (result.scores[g] > result.scores[result.best_index]) result.best_index = g;
  }
  result.best = grid[result.best_index];
  result.best_score = result.scores[result.best_index];
  return result;
}

/// Matrix form: `fit_predict(x_train, y_train, x_val, config)` returns
/// predictions for x_val.
template <class Config, class FitPredict>
GridResult<Config> cv_grid_search(const Eigen::MatrixXd& x, const std::vector<std::size_t>& y, std::size_t n_classes,
                                  const std::vector<Config>& grid, FitPredict&& fit_predict,
                                  const CvOptions& options = {}) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DimensionMismatch("rows and labels differ");
  return cv_grid_search_indexed(
      y, n_classes, grid,
      [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& val, const Config& config) {
        return fit_predict(take_rows(x, train), take(y, train), take_rows(x, val), config);
      },
      options);
}

inline GridResult<MlpConfig> mlp_grid_search(const Eigen::MatrixXd& x, const std::vector<std::size_t>& y,
                                             std::size_t n_classes, const std::vector<MlpConfig>& grid,
                                             const CvOptions& options = {}) {
  return cv_grid_search(
      x, y, n_classes, grid,
      [n_classes](const Eigen::MatrixXd& xt, const std::vector<std::size_t>& yt, const Eigen::MatrixXd& xv,
                  const MlpConfig& c) { return mlp_predict(mlp_fit(xt, yt, n_classes, c), xv); },
      options);
}

}  // namespace zsdt
