#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "zsdt/error.hpp"
#include "zsdt/tabular.hpp"
#include "zsdt/text.hpp"

namespace zsdt {

/// counts(t, p): samples of true class t predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

  static ConfusionMatrix from_labels(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                                     std::size_t n_classes) {
    if (truth.size() != predicted.size()) throw DimensionMismatch("truth and prediction lengths differ");
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
  }

  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1) {
    if (truth >= n_ || predicted >= n_) throw DimensionMismatch("class index out of range");
    counts_[truth * n_ + predicted] += count;
  }

  std::size_t classes() const noexcept { return n_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * n_ + predicted); }

  std::size_t total() const noexcept {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::size_t support(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += at(c, p);
    return s;
  }
  std::size_t predicted(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < n_; ++t) s += at(t, c);
    return s;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

/// Unweighted mean of per-class F1 over the whole label alphabet; a class
/// whose F1 is undefined contributes 0.
inline double macro_f1(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const auto pred = cm.predicted(c);
    const auto support = cm.support(c);
    const double precision = pred ? tp / static_cast<double>(pred) : 0.0;
    const double recall = support ? tp / static_cast<double>(support) : 0.0;
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(cm.classes());
}

/// Mean recall over the classes that occur in the truth.
inline double balanced_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto support = cm.support(c);
    if (!support) continue;
    sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(support);
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

struct Scores {
  double macro_f1 = 0.0;
  double balanced_accuracy = 0.0;
};

inline Scores score(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                    std::size_t n_classes) {
  auto cm = ConfusionMatrix::from_labels(truth, predicted, n_classes);
  return {macro_f1(cm), balanced_accuracy(cm)};
}

/// Median; the mean of the two middle values for even counts.
inline double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

struct ScoreRecord {
  std::string dataset;
  std::string method;
  double split_fraction = 0.67;
  std::size_t repeat = 0;
  double macro_f1 = 0.0;
  double balanced_accuracy = 0.0;
};

struct FailureRecord {
  std::string dataset;
  std::string method;
  double split_fraction = 0.67;
  std::size_t repeat = 0;
  std::string reason;
};

struct AggregateRow {
  std::string dataset;
  std::string method;
  double split_fraction = 0.67;
  std::vector<double> macro_f1;  // raw repeats, repeat order
  std::vector<double> balanced_accuracy;
  double median_macro_f1 = 0.0;
  double median_balanced_accuracy = 0.0;
};

/// Per-repeat scores for (dataset, method, split fraction) cells.
class MetricsReport {
 public:
  void add(ScoreRecord r) { records_.push_back(std::move(r)); }
  void add_failure(FailureRecord f) { failures_.push_back(std::move(f)); }
  void merge(const MetricsReport& other) {
    records_.insert(records_.end(), other.records_.begin(), other.records_.end());
    failures_.insert(failures_.end(), other.failures_.begin(), other.failures_.end());
  }

  const std::vector<ScoreRecord>& records() const noexcept { return records_; }
  const std::vector<FailureRecord>& failures() const noexcept { return failures_; }

  /// Canonical order: dataset, method and fraction as first seen, then repeat.
  void sort() {
    std::map<std::string, std::size_t> ds, me;
    for (const auto& r : records_) {
      ds.emplace(r.dataset, ds.size());
      me.emplace(r.method, me.size());
    }
    auto key = [&](const ScoreRecord& r) {
      return std::tuple(ds.at(r.dataset), me.at(r.method), -r.split_fraction, r.repeat);
    };
    std::stable_sort(records_.begin(), records_.end(),
                     [&](const ScoreRecord& a, const ScoreRecord& b) { return key(a) < key(b); });
    std::stable_sort(failures_.begin(), failures_.end(), [](const FailureRecord& a, const FailureRecord& b) {
      return std::tie(a.dataset, a.method, b.split_fraction, a.repeat) <
             std::tie(b.dataset, b.method, a.split_fraction, b.repeat);
    });
  }

 private:
  std::vector<ScoreRecord> records_;
  std::vector<FailureRecord> failures_;
};

/// Median per cell, cells in first-appearance order; raw repeats retained.
inline std::vector<AggregateRow> aggregate(const MetricsReport& report) {
  std::vector<AggregateRow> rows;
  for (const auto& r : report.records()) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const AggregateRow& a) {
      return a.dataset == r.dataset && a.method == r.method && a.split_fraction == r.split_fraction;
    });
    if (it == rows.end()) {
      rows.push_back(AggregateRow{r.dataset, r.method, r.split_fraction, {}, {}, 0.0, 0.0});
      it = std::prev(rows.end());
    }
    it->macro_f1.push_back(r.macro_f1);
    it->balanced_accuracy.push_back(r.balanced_accuracy);
  }
  for (auto& a : rows) {
    a.median_macro_f1 = median(a.macro_f1);
    a.median_balanced_accuracy = median(a.balanced_accuracy);
  }
  return rows;
}

inline std::string report_to_csv(const MetricsReport& report) {
  std::string out = "dataset,method,split_fraction,repeat,macro_f1,balanced_accuracy\n";
  for (const auto& r : report.records()) {
    out += csv_escape(r.dataset) + "," + csv_escape(r.method) + "," + text::format_number(r.split_fraction) + "," +
           std::to_string(r.repeat) + "," + text::format_number(r.macro_f1) + "," +
           text::format_number(r.balanced_accuracy) + "\n";
  }
  return out;
}

inline std::string aggregate_to_csv(const MetricsReport& report) {
  std::string out = "dataset,method,split_fraction,statistic,macro_f1,balanced_accuracy\n";
  for (const auto& a : aggregate(report)) {
    out += csv_escape(a.dataset) + "," + csv_escape(a.method) + "," + text::format_number(a.split_fraction) +
           ",median," + text::format_number(a.median_macro_f1) + "," +
           text::format_number(a.median_balanced_accuracy) + "\n";
  }
  return out;
}

inline std::string failures_to_csv(const MetricsReport& report) {
  std::string out = "dataset,method,split_fraction,repeat,reason\n";
  for (const auto& f : report.failures()) {
    out += csv_escape(f.dataset) + "," + csv_escape(f.method) + "," + text::format_number(f.split_fraction) + "," +
           std::to_string(f.repeat) + "," + csv_escape(f.reason) + "\n";
  }
  return out;
}

/// Reads the per-repeat CSV written by report_to_csv.
inline MetricsReport report_from_csv(std::string_view content) {
  auto records = parse_csv(content);
  if (records.empty()) throw IoError("empty report CSV");
  const std::vector<std::string> expected{"dataset", "method", "split_fraction", "repeat", "macro_f1",
                                          "balanced_accuracy"};
  if (records.front() != expected) throw IoError("unexpected report CSV header");
  MetricsReport report;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != expected.size()) throw IoError("report CSV row " + std::to_string(i) + " has wrong width");
    auto frac = text::parse_number(f[2]);
    auto rep = text::parse_number(f[3]);
    auto f1 = text::parse_number(f[4]);
    auto ba = text::parse_number(f[5]);
    if (!frac || !rep || !f1 || !ba) throw IoError("report CSV row " + std::to_string(i) + " is not numeric");
    report.add({f[0], f[1], *frac, static_cast<std::size_t>(*rep), *f1, *ba});
  }
  return report;
}

enum class TableFormat { markdown, csv };
enum class TableMetric { macro_f1, balanced_accuracy };

struct TableOptions {
  TableFormat format = TableFormat::markdown;
  TableMetric metric = TableMetric::macro_f1;
  std::optional<double> split_fraction;  // default: the first fraction in the report
  std::optional<std::string> baseline;   // difference mode: other methods shown as signed deltas
};

namespace detail {
inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
inline std::string signed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  std::string s = buf;
  if (s == "+0.00" || s == "-0.00") return "0.00";
  return s;
}
inline std::string signed_full(double v) {
  auto s = text::format_number(v);
  return v > 0.0 ? "+" + s : s;
}
}  // namespace detail

/// Datasets as rows, methods as columns, cell = median over repeats.
inline std::string emit_table(const MetricsReport& report, const TableOptions& options = {}) {
  auto rows = aggregate(report);
  if (rows.empty()) return {};
  const double fraction = options.split_fraction.value_or(rows.front().split_fraction);
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& a : rows) {
    if (a.split_fraction != fraction) continue;
    if (std::find(datasets.begin(), datasets.end(), a.dataset) == datasets.end()) datasets.push_back(a.dataset);
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
    cell[{a.dataset, a.method}] =
        options.metric == TableMetric::macro_f1 ? a.median_macro_f1 : a.median_balanced_accuracy;
  }
  if (options.baseline) {
    auto it = std::find(methods.begin(), methods.end(), *options.baseline);
    if (it == methods.end()) throw ConfigError("baseline method '" + *options.baseline + "' not in report");
    methods.erase(it);
    methods.insert(methods.begin(), *options.baseline);
  }
  const bool md = options.format == TableFormat::markdown;
  auto value = [&](const std::string& d, const std::string& m) -> std::string {
    auto it = cell.find({d, m});
    if (it == cell.end()) return md ? "n/a" : "";
    if (options.baseline && m != *options.baseline) {
      auto base = cell.find({d, *options.baseline});
      if (base == cell.end()) return md ? "n/a" : "";
      const double diff = it->second - base->second;
      return md ? detail::signed2(diff) : detail::signed_full(diff);
    }
    return md ? detail::fixed2(it->second) : text::format_number(it->second);
  };

  std::string out;
  if (md) {
    out += "| dataset |";
    for (const auto& m : methods) out += " " + m + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < methods.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& d : datasets) {
      out += "| " + d + " |";
      for (const auto& m : methods) out += " " + value(d, m) + " |";
      out += "\n";
    }
  } else {
    out += "dataset";
    for (const auto& m : methods) out += "," + csv_escape(m);
    out += "\n";
    for (const auto& d : datasets) {
      out += csv_escape(d);
      for (const auto& m : methods) out += "," + value(d, m);
      out += "\n";
    }
  }
  return out;
}

}  // namespace zsdt
