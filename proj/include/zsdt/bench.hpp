#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zsdt/config.hpp"
#include "zsdt/embedding.hpp"
#include "zsdt/greedy_tree.hpp"
#include "zsdt/grid_search.hpp"
#include "zsdt/induction.hpp"
#include "zsdt/llm_client.hpp"
#include "zsdt/metrics.hpp"
#include "zsdt/mlp.hpp"
#include "zsdt/random_trees.hpp"
#include "zsdt/rng.hpp"
#include "zsdt/tabular.hpp"

namespace zsdt {

inline constexpr const char* k_greedy_method = "greedy_tree";
inline constexpr const char* k_mlp_method = "mlp";
inline constexpr const char* k_random_trees_method = "random_trees";

/// FNV-1a; stable across platforms, used to key seeds by dataset name.
inline std::uint64_t stable_hash(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Runs task(i) for i in [0, n) on up to `workers` threads. Tasks must not
/// throw.
template <class Task>
void parallel_for(std::size_t n, std::size_t workers, Task&& task) {
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct LoadedDataset {
  DatasetEntry entry;
  Dataset data;

  std::string target_description() const {
    return entry.target_description.empty() ? data.schema().target().name : entry.target_description;
  }
};

inline std::vector<LoadedDataset> load_datasets(const ExperimentConfig& config) {
  std::vector<LoadedDataset> out;
  for (const auto& d : config.datasets) out.push_back({d, load_csv(d.csv, d.schema)});
  return out;
}

/// Fixture responses for one dataset: every *.txt under {dir}/{dataset}, by
/// file name.
inline std::vector<std::string> load_fixtures(const std::filesystem::path& dir, const std::string& dataset) {
  const auto root = dir / dataset;
  if (!std::filesystem::is_directory(root)) throw IoError("no fixture directory " + root.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no fixture responses in " + root.string());
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(read_file(f));
  return out;
}

/// One client per HTTP provider (shared across datasets so the in-flight
/// limit holds), one per (fixture provider, dataset).
class ClientSet {
 public:
  ClientSet(const ExperimentConfig& config, const std::vector<LoadedDataset>& datasets, double temperature) {
    for (std::size_t p = 0; p < config.providers.size(); ++p) {
      const auto& entry = config.providers[p];
      auto pc = entry.config;
      pc.temperature = temperature;
      ClientOptions options{config.cache_dir, config.offline, entry.max_in_flight};
      if (entry.kind == ProviderKind::http) {
        auto shared = std::make_shared<LlmClient>(pc, std::make_shared<HttpProvider>(), options);
        for (std::size_t d = 0; d < datasets.size(); ++d) clients_[{p, d}] = shared;
      } else {
        for (std::size_t d = 0; d < datasets.size(); ++d) {
          auto provider = std::make_shared<FixtureProvider>(load_fixtures(entry.fixtures, datasets[d].entry.name));
          clients_[{p, d}] = std::make_shared<LlmClient>(pc, provider, options);
        }
      }
    }
  }

  LlmClient& at(std::size_t provider, std::size_t dataset) const { return *clients_.at({provider, dataset}); }

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<LlmClient>> clients_;
};

struct SplitArtifact {
  std::string dataset;
  double fraction = 0.0;
  std::vector<SplitIndices> splits;
};

struct ForestArtifact {
  std::string dataset;
  std::string provider;
  std::size_t repeat = 0;
  ZeroShotForest forest;
};

struct ExperimentRun {
  MetricsReport report;
  std::vector<SplitArtifact> splits;
  std::vector<ForestArtifact> forests;
  std::vector<std::string> log;

  bool partial() const noexcept { return !report.failures().empty(); }
};

namespace bench_detail {

inline std::vector<SplitArtifact> plan_splits(const ExperimentConfig& config, const std::vector<LoadedDataset>& data) {
  std::vector<SplitArtifact> out;
  for (const auto& d : data) {
    for (std::size_t f = 0; f < config.splits.fractions.size(); ++f) {
      SplitPlan plan{config.splits.fractions[f], config.splits.repeats,
                     derive_seed(config.seed, {stable_hash(d.entry.name), f}), config.splits.stratify};
      out.push_back({d.entry.name, plan.train_fraction, make_splits(d.data, plan)});
    }
  }
  return out;  // dataset-major, fraction-minor
}

/// Tree sets per (dataset, provider, repeat); the draws of repeat r use
/// sample indices r*m .. r*m + m - 1 and are shared by every split fraction.
struct TreeSets {
  std::size_t providers = 0, repeats = 0;
  std::vector<std::optional<ZeroShotForest>> sets;
  std::vector<std::string> errors;

  std::size_t index(std::size_t d, std::size_t p, std::size_t r) const { return (d * providers + p) * repeats + r; }
};

inline TreeSets induce_tree_sets(const ExperimentConfig& config, const std::vector<LoadedDataset>& data,
                                 const ClientSet& clients, std::optional<std::size_t> depth, std::size_t m,
                                 const InductionOptions& options) {
  TreeSets ts;
  ts.providers = config.providers.size();
  ts.repeats = config.splits.repeats;
  const std::size_t n = data.size() * ts.providers * ts.repeats;
  ts.sets.resize(n);
  ts.errors.resize(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    const std::size_t r = i % ts.repeats;
    const std::size_t p = (i / ts.repeats) % ts.providers;
    const std::size_t d = i / (ts.repeats * ts.providers);
    try {
      const auto& ds = data[d];
      auto spec = PromptSpec::from_schema(ds.data.schema(), ds.target_description(), depth);
      ts.sets[i] = sample_forest(spec, ds.data.schema(), clients.at(p, d), m, options, r * m);
      for (auto& prov : ts.sets[i]->provenance) prov.provider = config.providers[p].name;
    } catch (const std::exception& e) {
      ts.errors[i] = e.what();
    }
  });
  return ts;
}

/// Depth from {1, 2} by stratified 3-fold CV on the training partition, then
/// a refit on the whole partition.
inline DecisionTree fit_greedy_baseline(const Dataset& train, std::uint64_t seed) {
  std::vector<GreedyTreeConfig> grid;
  for (auto depth : default_greedy_depths()) grid.push_back({depth, 1});
  auto cv = cv_grid_search_indexed(
      train.targets(), train.schema().label_count(), grid,
      [&](const std::vector<std::size_t>& tr, const std::vector<std::size_t>& va, const GreedyTreeConfig& c) {
        return predict_indices(greedy_tree_fit(train.subset(tr), c), train.subset(va));
      },
      CvOptions{3, seed, 1});
  return greedy_tree_fit(train, cv.best);
}

inline Scores score_tree(const DecisionTree& tree, const Dataset& test) {
  return score(test.targets(), predict_indices(tree, test), test.schema().label_count());
}

inline Scores fit_score_mlp(const Eigen::MatrixXd& x_train, const std::vector<std::size_t>& y_train,
                            const Eigen::MatrixXd& x_test, const std::vector<std::size_t>& y_test,
                            std::size_t n_classes, const EmbeddingParams& params, std::uint64_t seed) {
  MlpConfig base = params.mlp;
  base.seed = seed;
  auto grid = mlp_grid(base, params.hidden_sizes, params.l2_strengths);
  auto cv = mlp_grid_search(x_train, y_train, n_classes, grid, CvOptions{params.folds, seed, 1});
  auto model = mlp_fit(x_train, y_train, n_classes, cv.best);
  return score(y_test, mlp_predict(model, x_test), n_classes);
}

}  // namespace bench_detail

/// Zero-shot trees against the greedy data-driven baseline, one cell per
/// (dataset, split fraction, repeat).
inline ExperimentRun run_induction_experiment(const ExperimentConfig& config) {
  config.check();
  ExperimentRun run;
  const auto data = load_datasets(config);
  ClientSet clients(config, data, config.induction.temperature);
  run.splits = bench_detail::plan_splits(config, data);
  InductionOptions options{config.induction.max_extra_attempts, config.induction.repair, {}};
  auto trees = bench_detail::induce_tree_sets(config, data, clients, config.induction.depth, config.induction.trees,
                                              options);

  const std::size_t n_frac = config.splits.fractions.size();
  const std::size_t n_rep = config.splits.repeats;
  const std::size_t cells = data.size() * n_frac * n_rep;
  std::vector<MetricsReport> slots(cells);
  parallel_for(cells, config.workers, [&](std::size_t i) {
    const std::size_t r = i % n_rep;
    const std::size_t f = (i / n_rep) % n_frac;
    const std::size_t d = i / (n_rep * n_frac);
    const auto& ds = data[d];
    const double fraction = config.splits.fractions[f];
    auto& out = slots[i];
    const auto& split = run.splits[d * n_frac + f].splits[r];
    std::optional<Dataset> train, test;
    try {
      train = ds.data.subset(split.train, "train");
      auto imputer = KnnImputer::fit(*train, config.knn_k);
      test = imputer.transform(ds.data.subset(split.test, "test"));
      train = imputer.transform(*train);
    } catch (const std::exception& e) {
      for (const auto& p : config.providers) out.add_failure({ds.entry.name, p.name, fraction, r, e.what()});
      out.add_failure({ds.entry.name, k_greedy_method, fraction, r, e.what()});
      return;
    }
    for (std::size_t p = 0; p < config.providers.size(); ++p) {
      const auto& name = config.providers[p].name;
      const auto k = trees.index(d, p, r);
      if (!trees.sets[k]) {
        out.add_failure({ds.entry.name, name, fraction, r, trees.errors[k]});
        continue;
      }
      try {
        std::vector<double> f1, ba;
        for (const auto& t : trees.sets[k]->trees) {
          auto s = bench_detail::score_tree(t, *test);
          f1.push_back(s.macro_f1);
          ba.push_back(s.balanced_accuracy);
        }
        out.add({ds.entry.name, name, fraction, r, median(f1), median(ba)});
      } catch (const std::exception& e) {
        out.add_failure({ds.entry.name, name, fraction, r, e.what()});
      }
    }
    try {
      auto tree = bench_detail::fit_greedy_baseline(*train, derive_seed(config.seed, {stable_hash(ds.entry.name), f, r}));
      auto s = bench_detail::score_tree(tree, *test);
      out.add({ds.entry.name, k_greedy_method, fraction, r, s.macro_f1, s.balanced_accuracy});
    } catch (const std::exception& e) {
      out.add_failure({ds.entry.name, k_greedy_method, fraction, r, e.what()});
    }
  });
  for (const auto& s : slots) run.report.merge(s);
  run.report.sort();
  for (std::size_t k = 0; k < trees.sets.size(); ++k) {
    if (!trees.sets[k]) continue;
    const std::size_t r = k % trees.repeats;
    const std::size_t p = (k / trees.repeats) % trees.providers;
    const std::size_t d = k / (trees.repeats * trees.providers);
    run.forests.push_back({data[d].entry.name, config.providers[p].name, r, *trees.sets[k]});
  }
  return run;
}

/// MLP on preprocessed features, alone and with random-trees or zero-shot
/// embeddings; one cell per (dataset, split fraction, repeat). Every method of
/// a cell shares the MLP seed.
inline ExperimentRun run_embedding_experiment(const ExperimentConfig& config) {
  config.check();
  ExperimentRun run;
  const auto& params = config.embedding;
  const auto data = load_datasets(config);
  ClientSet clients(config, data, params.temperature);
  run.splits = bench_detail::plan_splits(config, data);
  InductionOptions options{params.max_extra_attempts, params.repair, {}};
  auto forests = bench_detail::induce_tree_sets(config, data, clients, params.depth, params.trees, options);

  const std::size_t n_frac = config.splits.fractions.size();
  const std::size_t n_rep = config.splits.repeats;
  const std::size_t cells = data.size() * n_frac * n_rep;
  std::vector<MetricsReport> slots(cells);
  parallel_for(cells, config.workers, [&](std::size_t i) {
    const std::size_t r = i % n_rep;
    const std::size_t f = (i / n_rep) % n_frac;
    const std::size_t d = i / (n_rep * n_frac);
    const auto& ds = data[d];
    const double fraction = config.splits.fractions[f];
    const std::size_t n_classes = ds.data.schema().label_count();
    auto& out = slots[i];
    const auto& split = run.splits[d * n_frac + f].splits[r];
    const std::uint64_t seed = derive_seed(config.seed, {stable_hash(ds.entry.name), f, r});

    std::vector<std::string> methods{k_mlp_method};
    if (params.random_trees) methods.push_back(k_random_trees_method);
    for (const auto& p : config.providers) methods.push_back(p.name);

    std::optional<Dataset> train, test;
    std::optional<DesignMatrix> x_train, x_test;
    try {
      auto imputer = KnnImputer::fit(ds.data.subset(split.train, "train"), config.knn_k);
      train = imputer.transform(ds.data.subset(split.train, "train"));
      test = imputer.transform(ds.data.subset(split.test, "test"));
      auto pre = Preprocessor::fit(*train);
      x_train = pre.transform(*train);
      x_test = pre.transform(*test);
    } catch (const std::exception& e) {
      for (const auto& m : methods) out.add_failure({ds.entry.name, m, fraction, r, e.what()});
      return;
    }

    auto evaluate = [&](const std::string& method, const std::function<std::pair<DesignMatrix, DesignMatrix>()>& make) {
      try {
        auto [xtr, xte] = make();
        auto s = bench_detail::fit_score_mlp(xtr.values, train->targets(), xte.values, test->targets(), n_classes,
                                             params, seed);
        out.add({ds.entry.name, method, fraction, r, s.macro_f1, s.balanced_accuracy});
      } catch (const std::exception& e) {
        out.add_failure({ds.entry.name, method, fraction, r, e.what()});
      }
    };

    evaluate(k_mlp_method, [&] { return std::pair(*x_train, *x_test); });
    if (params.random_trees) {
      evaluate(k_random_trees_method, [&] {
        auto forest = random_trees_embedding(*train, RandomTreesConfig{params.trees, params.random_trees_depth, seed});
        return std::pair(augment(*x_train, *train, forest, params.mode), augment(*x_test, *test, forest, params.mode));
      });
    }
    for (std::size_t p = 0; p < config.providers.size(); ++p) {
      const auto& name = config.providers[p].name;
      const auto k = forests.index(d, p, r);
      if (!forests.sets[k]) {
        out.add_failure({ds.entry.name, name, fraction, r, forests.errors[k]});
        continue;
      }
      evaluate(name, [&] {
        const auto& forest = *forests.sets[k];
        return std::pair(augment(*x_train, *train, forest, params.mode), augment(*x_test, *test, forest, params.mode));
      });
    }
  });
  for (const auto& s : slots) run.report.merge(s);
  run.report.sort();
  for (std::size_t k = 0; k < forests.sets.size(); ++k) {
    if (!forests.sets[k]) continue;
    const std::size_t r = k % forests.repeats;
    const std::size_t p = (k / forests.repeats) % forests.providers;
    const std::size_t d = k / (forests.repeats * forests.providers);
    run.forests.push_back({data[d].entry.name, config.providers[p].name, r, *forests.sets[k]});
  }
  return run;
}

inline ExperimentRun run_experiment(const ExperimentConfig& config) {
  return config.mode == ExperimentMode::induction ? run_induction_experiment(config)
                                                  : run_embedding_experiment(config);
}

struct SelfcheckResult {
  std::string dataset;
  double depth1_macro_f1 = 0.0;
  double depth2_macro_f1 = 0.0;
  double best_macro_f1 = 0.0;
  bool pass = false;
};

/// Training macro-F1 of greedy trees of depth 1 and 2 on the whole (imputed)
/// dataset; passes at 0.8 or above. Advisory.
inline SelfcheckResult selfcheck_dataset(const Dataset& data, std::string name = {}, std::size_t knn_k = 10,
                                         double threshold = 0.8) {
  const Dataset full = data.missing_count() ? impute_knn(data, data, knn_k) : data;
  SelfcheckResult r;
  r.dataset = std::move(name);
  r.depth1_macro_f1 = bench_detail::score_tree(greedy_tree_fit(full, {1, 1}), full).macro_f1;
  r.depth2_macro_f1 = bench_detail::score_tree(greedy_tree_fit(full, {2, 1}), full).macro_f1;
  r.best_macro_f1 = std::max(r.depth1_macro_f1, r.depth2_macro_f1);
  r.pass = r.best_macro_f1 >= threshold;
  return r;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Markdown tables for every split fraction; difference columns against
/// `baseline` when it is present in the report.
inline std::string summary_tables(const MetricsReport& report, const std::vector<double>& fractions,
                                  const std::optional<std::string>& baseline) {
  std::string out;
  bool has_baseline = false;
  if (baseline) {
    for (const auto& r : report.records()) has_baseline = has_baseline || r.method == *baseline;
  }
  for (double f : fractions) {
    bool any = false;
    for (const auto& r : report.records()) any = any || r.split_fraction == f;
    if (!any) continue;
    for (auto metric : {TableMetric::macro_f1, TableMetric::balanced_accuracy}) {
      const std::string title = metric == TableMetric::macro_f1 ? "macro F1" : "balanced accuracy";
      out += "## Median test " + title + ", train fraction " + text::format_number(f) + "\n\n";
      out += emit_table(report, {TableFormat::markdown, metric, f, std::nullopt}) + "\n";
      if (has_baseline) {
        out += "### Difference to " + *baseline + "\n\n";
        out += emit_table(report, {TableFormat::markdown, metric, f, baseline}) + "\n";
      }
    }
  }
  return out;
}

/// report.csv, report_median.csv, failures.csv, table.md, splits/, trees/.
inline void write_outputs(const ExperimentRun& run, const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.csv", report_to_csv(run.report));
  write_text(dir / "report_median.csv", aggregate_to_csv(run.report));
  write_text(dir / "failures.csv", failures_to_csv(run.report));
  const std::optional<std::string> baseline =
      config.mode == ExperimentMode::embedding ? std::optional<std::string>(k_mlp_method) : std::nullopt;
  write_text(dir / "table.md", summary_tables(run.report, config.splits.fractions, baseline));
  for (const auto& s : run.splits) {
    write_text(dir / "splits" / (s.dataset + "_" + text::format_number(s.fraction) + ".csv"), splits_to_csv(s.splits));
  }
  for (const auto& f : run.forests) {
    write_text(dir / "trees" / f.dataset / f.provider / ("repeat_" + std::to_string(f.repeat) + ".json"),
               to_json(f.forest).dump(2) + "\n");
  }
}

}  // namespace zsdt
