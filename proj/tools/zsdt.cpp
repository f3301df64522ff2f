// zsdt: induce | embed | report | selfcheck

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zsdt/bench.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> model;
  std::optional<std::string> endpoint;
  std::optional<double> temperature;
  std::optional<std::string> depth;
  std::optional<std::size_t> trees;
  std::optional<std::string> mode;
  std::optional<std::string> splits;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> cache_dir;
  bool offline = false;
  std::optional<std::size_t> workers;
  std::string out = "out";
};

void add_run_flags(CLI::App& cmd, Overrides& o, bool embedding) {
  cmd.add_option("--config", o.config_path, "Experiment config (TOML)")->required();
  cmd.add_option("--model", o.model, "Model name for every provider");
  cmd.add_option("--endpoint", o.endpoint, "Chat endpoint for HTTP providers");
  cmd.add_option("--temperature", o.temperature, "Sampling temperature");
  cmd.add_option("--depth", o.depth, "Maximum tree depth, or 'none'");
  cmd.add_option("--trees", o.trees, "Trees per repeat");
  if (embedding) cmd.add_option("--mode", o.mode, "extend or replace")->check(CLI::IsMember({"extend", "replace"}));
  cmd.add_option("--splits", o.splits, "Comma-separated train fractions, e.g. 0.67,0.5");
  cmd.add_option("--seed", o.seed, "Global seed");
  cmd.add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd.add_flag("--offline", o.offline, "Serve completions from cache or fixtures only");
  cmd.add_option("--workers", o.workers, "Worker threads");
  cmd.add_option("--out", o.out, "Output directory")->capture_default_str();
}

std::optional<std::size_t> parse_depth(const std::string& s) {
  if (zsdt::text::fold(s) == "none") return std::nullopt;
  auto v = zsdt::text::parse_decimal(s);
  if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
    throw zsdt::ConfigError("--depth must be a non-negative integer or 'none'");
  }
  if (*v == 0) return std::nullopt;
  return static_cast<std::size_t>(*v);
}

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    auto tok = zsdt::text::trim(std::string_view(s).substr(start, end == std::string::npos ? end : end - start));
    auto v = zsdt::text::parse_decimal(tok);
    if (!v) throw zsdt::ConfigError("--splits: cannot read '" + std::string(tok) + "'");
    out.push_back(*v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

zsdt::ExperimentConfig load_with_overrides(const Overrides& o, zsdt::ExperimentMode mode) {
  auto cfg = zsdt::load_config(o.config_path);
  cfg.mode = mode;
  const bool emb = mode == zsdt::ExperimentMode::embedding;
  if (o.endpoint) {
    bool any_http = false;
    for (auto& p : cfg.providers) {
      if (p.kind == zsdt::ProviderKind::http) {
        p.config.endpoint_url = *o.endpoint;
        any_http = true;
      }
    }
    if (!any_http) {
      zsdt::ProviderEntry p;
      p.name = o.model.value_or("llm");
      p.config.endpoint_url = *o.endpoint;
      p.config.model_name = p.name;
      cfg.providers.push_back(p);
    }
  }
  if (o.model) {
    for (auto& p : cfg.providers) p.config.model_name = *o.model;
  }
  if (o.temperature) (emb ? cfg.embedding.temperature : cfg.induction.temperature) = *o.temperature;
  if (o.depth) (emb ? cfg.embedding.depth : cfg.induction.depth) = parse_depth(*o.depth);
  if (o.trees) (emb ? cfg.embedding.trees : cfg.induction.trees) = *o.trees;
  if (o.mode) cfg.embedding.mode = *zsdt::parse_augment_mode(*o.mode);
  if (o.splits) cfg.splits.fractions = parse_fractions(*o.splits);
  if (o.seed) cfg.seed = *o.seed;
  if (o.cache_dir) cfg.cache_dir = std::filesystem::path(*o.cache_dir);
  if (o.offline) cfg.offline = true;
  if (o.workers) cfg.workers = *o.workers;
  for (auto& p : cfg.providers) p.config.temperature = emb ? cfg.embedding.temperature : cfg.induction.temperature;
  cfg.check();
  return cfg;
}

int run(const Overrides& o, zsdt::ExperimentMode mode) {
  auto cfg = load_with_overrides(o, mode);
  if (cfg.providers.empty()) std::cerr << "warning: no providers configured; only baselines will run\n";
  auto result = zsdt::run_experiment(cfg);
  zsdt::write_outputs(result, cfg, o.out);
  const auto failures = result.report.failures().size();
  std::cerr << result.report.records().size() << " scores, " << failures << " failed cells, written to " << o.out
            << "\n";
  for (const auto& f : result.report.failures()) {
    std::cerr << "  failed: " << f.dataset << " / " << f.method << " / " << zsdt::text::format_number(f.split_fraction)
              << " / repeat " << f.repeat << ": " << f.reason << "\n";
  }
  return failures ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot decision trees from chat models: induction, embeddings, benchmarks"};
  app.require_subcommand(1);

  Overrides induce_opts, embed_opts;
  auto* induce = app.add_subcommand("induce", "Induction experiment: zero-shot trees vs a greedy tree");
  add_run_flags(*induce, induce_opts, false);
  auto* embed = app.add_subcommand("embed", "Embedding experiment: MLP with and without tree embeddings");
  add_run_flags(*embed, embed_opts, true);

  std::string report_input, report_format = "markdown", report_metric = "f1";
  std::optional<std::string> report_baseline, report_split;
  std::string report_out = "out";
  auto* report = app.add_subcommand("report", "Render a table from a per-repeat report CSV");
  report->add_option("--input", report_input, "Report CSV (default: <out>/report.csv)");
  report->add_option("--out", report_out, "Directory holding report.csv")->capture_default_str();
  report->add_option("--format", report_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  report->add_option("--metric", report_metric, "f1 or ba")->check(CLI::IsMember({"f1", "ba"}));
  report->add_option("--baseline", report_baseline, "Show other methods as differences to this one");
  report->add_option("--splits", report_split, "Train fraction to tabulate");

  std::string self_config;
  std::size_t self_k = 10;
  auto* selfcheck = app.add_subcommand("selfcheck", "Training macro-F1 of depth-1/2 greedy trees per dataset");
  selfcheck->add_option("--config", self_config, "Experiment config (TOML)")->required();
  selfcheck->add_option("--knn", self_k, "Neighbours for imputation")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*induce) return run(induce_opts, zsdt::ExperimentMode::induction);
    if (*embed) return run(embed_opts, zsdt::ExperimentMode::embedding);
    if (*report) {
      const std::filesystem::path input = report_input.empty() ? std::filesystem::path(report_out) / "report.csv"
                                                               : std::filesystem::path(report_input);
      auto rep = zsdt::report_from_csv(zsdt::read_file(input));
      zsdt::TableOptions opts;
      opts.format = report_format == "csv" ? zsdt::TableFormat::csv : zsdt::TableFormat::markdown;
      opts.metric = report_metric == "ba" ? zsdt::TableMetric::balanced_accuracy : zsdt::TableMetric::macro_f1;
      opts.baseline = report_baseline;
      if (report_split) {
        auto v = zsdt::text::parse_decimal(*report_split);
        if (!v) throw zsdt::ConfigError("--splits expects one fraction");
        opts.split_fraction = *v;
      }
      std::cout << zsdt::emit_table(rep, opts);
      return 0;
    }
    if (*selfcheck) {
      auto cfg = zsdt::load_config(self_config);
      for (const auto& d : zsdt::load_datasets(cfg)) {
        auto r = zsdt::selfcheck_dataset(d.data, d.entry.name, self_k);
        std::printf("%s: depth1 %.4f depth2 %.4f -> %s\n", r.dataset.c_str(), r.depth1_macro_f1, r.depth2_macro_f1,
                    r.pass ? "pass" : "fail (advisory)");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
