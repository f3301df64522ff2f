#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "zsdt/error.hpp"
#include "zsdt/rng.hpp"
#include "zsdt/schema.hpp"
#include "zsdt/text.hpp"
#include "zsdt/tree.hpp"

namespace zsdt {

/// Rows of raw feature values plus target label indices. Values keep the
/// dataset's original units; missing cells are std::monostate until imputed.
class Dataset {
 public:
  Dataset(std::shared_ptr<const DatasetSchema> schema, std::vector<std::vector<Value>> rows,
          std::vector<std::size_t> targets, std::string provenance = {})
      : schema_(std::move(schema)),
        rows_(std::move(rows)),
        targets_(std::move(targets)),
        provenance_(std::move(provenance)) {
    if (!schema_) throw SchemaError("dataset without schema");
    if (rows_.size() != targets_.size()) throw DimensionMismatch("row and target counts differ");
    index_ = std::make_shared<const FeatureIndex>(schema_->display_names());
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r].size() != schema_->feature_count()) {
        throw DimensionMismatch("row " + std::to_string(r) + " has " + std::to_string(rows_[r].size()) +
                                " values, schema has " + std::to_string(schema_->feature_count()) + " features");
      }
      if (targets_[r] >= schema_->label_count()) throw DimensionMismatch("target index out of range");
      for (std::size_t c = 0; c < rows_[r].size(); ++c) check_kind(r, c);
    }
  }

  const DatasetSchema& schema() const noexcept { return *schema_; }
  const std::shared_ptr<const DatasetSchema>& schema_ptr() const noexcept { return schema_; }
  const std::shared_ptr<const FeatureIndex>& feature_index() const noexcept { return index_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<std::vector<Value>>& rows() const noexcept { return rows_; }
  const std::vector<Value>& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<std::size_t>& targets() const noexcept { return targets_; }
  const std::string& provenance() const noexcept { return provenance_; }

  Sample sample(std::size_t i) const { return Sample(index_, rows_.at(i)); }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += static_cast<std::size_t>(std::count_if(r.begin(), r.end(), is_missing));
    return n;
  }

  Dataset subset(const std::vector<std::size_t>& indices, std::string_view tag = {}) const {
    std::vector<std::vector<Value>> rows;
    std::vector<std::size_t> targets;
    rows.reserve(indices.size());
    targets.reserve(indices.size());
    for (auto i : indices) {
      rows.push_back(rows_.at(i));
      targets.push_back(targets_.at(i));
    }
    auto provenance = provenance_;
    if (!tag.empty()) provenance += provenance.empty() ? std::string(tag) : "/" + std::string(tag);
    return Dataset(schema_, std::move(rows), std::move(targets), std::move(provenance));
  }

  Dataset with_targets(std::vector<std::size_t> targets) const {
    return Dataset(schema_, rows_, std::move(targets), provenance_);
  }

 private:
  void check_kind(std::size_t r, std::size_t c) const {
    const auto& v = rows_[r][c];
    if (is_missing(v)) return;
    const auto& f = schema_->feature(c);
    const bool numeric = std::holds_alternative<double>(v);
    if (f.kind == FeatureKind::nominal && numeric) {
      throw CellTypeError(r + 1, c + 1, "numeric value in nominal column '" + f.name + "'");
    }
    if (f.kind != FeatureKind::nominal && !numeric) {
      throw CellTypeError(r + 1, c + 1, "category value in numeric column '" + f.name + "'");
    }
  }

  std::shared_ptr<const DatasetSchema> schema_;
  std::shared_ptr<const FeatureIndex> index_;
  std::vector<std::vector<Value>> rows_;
  std::vector<std::size_t> targets_;
  std::string provenance_;
};

inline bool is_missing_marker(std::string_view cell) {
  auto t = text::trim(cell);
  return t.empty() || t == "?";
}

/// RFC 4180 style records: quoted fields, doubled quotes, CRLF tolerated.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw IoError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Parses CSV text against a schema. Header names are matched like feature
/// names (case and bracketed units ignored); column order may differ.
inline Dataset parse_dataset_csv(std::string_view content, std::shared_ptr<const DatasetSchema> schema,
                                 std::string provenance = {}) {
  auto records = parse_csv(content);
  if (records.empty()) throw SchemaMismatch("CSV has no header");
  const auto& header = records.front();
  const std::size_t n_features = schema->feature_count();
  std::vector<std::optional<std::size_t>> column_feature(header.size());
  std::optional<std::size_t> target_column;
  std::vector<bool> seen(n_features, false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (text::feature_key(header[c]) == text::feature_key(schema->target().name) && !target_column) {
      target_column = c;
      continue;
    }
    auto f = schema->find_feature(header[c]);
    if (!f) throw SchemaMismatch("CSV column '" + header[c] + "' is not in the schema");
    if (seen[*f]) throw SchemaMismatch("CSV column '" + header[c] + "' appears twice");
    seen[*f] = true;
    column_feature[c] = *f;
  }
  for (std::size_t f = 0; f < n_features; ++f) {
    if (!seen[f]) throw SchemaMismatch("schema feature '" + schema->feature(f).name + "' has no CSV column");
  }
  if (!target_column) throw SchemaMismatch("CSV has no target column '" + schema->target().name + "'");

  std::vector<std::vector<Value>> rows;
  std::vector<std::size_t> targets;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw CellTypeError(r, rec.size(), "expected " + std::to_string(header.size()) + " fields");
    }
    std::vector<Value> row(n_features);
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const auto& cell = rec[c];
      if (c == *target_column) {
        auto label = schema->find_label(cell);
        if (!label) throw CellTypeError(r, c + 1, "unknown target label '" + cell + "'");
        targets.push_back(*label);
        continue;
      }
      const auto fi = *column_feature[c];
      if (is_missing_marker(cell)) continue;
      const auto& spec = schema->feature(fi);
      switch (spec.kind) {
        case FeatureKind::numeric: {
          auto v = text::parse_number(cell);
          if (!v || !std::isfinite(*v)) throw CellTypeError(r, c + 1, "'" + cell + "' is not a number");
          row[fi] = *v;
          break;
        }
        case FeatureKind::ordinal: {
          if (auto v = text::parse_number(cell); v && std::isfinite(*v)) {
            row[fi] = *v;
          } else if (auto ci = spec.find_category(cell)) {
            row[fi] = static_cast<double>(*ci);
          } else {
            throw CellTypeError(r, c + 1, "'" + cell + "' is neither a number nor a level of '" + spec.name + "'");
          }
          break;
        }
        case FeatureKind::nominal: {
          auto ci = spec.find_category(cell);
          if (!ci) throw CellTypeError(r, c + 1, "'" + cell + "' is not a category of '" + spec.name + "'");
          row[fi] = spec.categories[*ci];
          break;
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return Dataset(std::move(schema), std::move(rows), std::move(targets), std::move(provenance));
}

inline Dataset load_csv(const std::filesystem::path& csv_path, std::shared_ptr<const DatasetSchema> schema) {
  return parse_dataset_csv(read_file(csv_path), std::move(schema), csv_path.string());
}

inline Dataset load_csv(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path) {
  return load_csv(csv_path, std::make_shared<const DatasetSchema>(load_schema(schema_path)));
}

inline std::string to_csv(const Dataset& data) {
  std::string out;
  const auto& schema = data.schema();
  for (const auto& f : schema.features()) out += csv_escape(f.display_name()) + ",";
  out += csv_escape(schema.target().name) + "\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (const auto& v : data.row(r)) {
      if (const auto* d = std::get_if<double>(&v)) out += text::format_number(*d);
      if (const auto* s = std::get_if<std::string>(&v)) out += csv_escape(*s);
      out += ",";
    }
    out += csv_escape(schema.labels()[data.targets()[r]]) + "\n";
  }
  return out;
}

/// kNN imputation fitted on a training partition. Distances are Euclidean
/// over the numeric and ordinal columns observed in both rows, after min-max
/// normalisation with training bounds.
class KnnImputer {
 public:
  static KnnImputer fit(const Dataset& train, std::size_t k = 10) {
    if (k == 0) throw ConfigError("k must be >= 1");
    KnnImputer imp;
    imp.k_ = k;
    imp.schema_ = train.schema_ptr();
    imp.rows_ = train.rows();
    const auto n_features = train.schema().feature_count();
    imp.min_.assign(n_features, 0.0);
    imp.max_.assign(n_features, 0.0);
    imp.observed_.assign(n_features, 0);
    for (std::size_t c = 0; c < n_features; ++c) {
      bool first = true;
      for (const auto& row : imp.rows_) {
        if (is_missing(row[c])) continue;
        ++imp.observed_[c];
        if (const auto* d = std::get_if<double>(&row[c])) {
          imp.min_[c] = first ? *d : std::min(imp.min_[c], *d);
          imp.max_[c] = first ? *d : std::max(imp.max_[c], *d);
          first = false;
        }
      }
    }
    return imp;
  }

  std::size_t k() const noexcept { return k_; }
  const std::vector<double>& mins() const noexcept { return min_; }
  const std::vector<double>& maxs() const noexcept { return max_; }

  double normalized(std::size_t column, double v) const {
    const double range = max_[column] - min_[column];
    return range > 0.0 ? (v - min_[column]) / range : 0.0;
  }

  /// Distance between a query row and training row `t`; +inf when the two
  /// rows share no observed numeric column.
  double distance(const std::vector<Value>& query, std::size_t t) const {
    double sum = 0.0;
    bool shared = false;
    const auto& row = rows_[t];
    for (std::size_t c = 0; c < query.size(); ++c) {
      if (!schema_->feature(c).is_numeric_like()) continue;
      const auto* a = std::get_if<double>(&query[c]);
      const auto* b = std::get_if<double>(&row[c]);
      if (!a || !b) continue;
      const double d = normalized(c, *a) - normalized(c, *b);
      sum += d * d;
      shared = true;
    }
    return shared ? std::sqrt(sum) : std::numeric_limits<double>::infinity();
  }

  /// Training rows (nearest first, index breaks ties) that observe `column`.
  std::vector<std::size_t> neighbors(const std::vector<Value>& query, std::size_t column) const {
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t t = 0; t < rows_.size(); ++t) {
      if (!is_missing(rows_[t][column])) candidates.emplace_back(distance(query, t), t);
    }
    const auto take = std::min(k_, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(candidates[i].second);
    return out;
  }

  std::vector<Value> impute_row(const std::vector<Value>& query) const {
    std::vector<Value> out = query;
    for (std::size_t c = 0; c < query.size(); ++c) {
      if (!is_missing(query[c])) continue;
      const auto& spec = schema_->feature(c);
      if (observed_[c] == 0) throw AllMissingColumn(spec.name);
      auto nn = neighbors(query, c);
      if (spec.is_numeric_like()) {
        double sum = 0.0;
        for (auto t : nn) sum += std::get<double>(rows_[t][c]);
        out[c] = sum / static_cast<double>(nn.size());
      } else {
        std::vector<std::size_t> votes(spec.categories.size(), 0);
        for (auto t : nn) {
          if (auto ci = spec.find_category(std::get<std::string>(rows_[t][c]))) ++votes[*ci];
        }
        auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        out[c] = spec.categories[best];
      }
    }
    return out;
  }

  Dataset transform(const Dataset& data) const {
    std::vector<std::vector<Value>> rows;
    rows.reserve(data.size());
    for (const auto& r : data.rows()) rows.push_back(impute_row(r));
    return Dataset(data.schema_ptr(), std::move(rows), data.targets(), data.provenance());
  }

 private:
  std::size_t k_ = 10;
  std::shared_ptr<const DatasetSchema> schema_;
  std::vector<std::vector<Value>> rows_;
  std::vector<double> min_, max_;
  std::vector<std::size_t> observed_;
};

/// Fits on `train`, imputes `apply_to`.
inline Dataset impute_knn(const Dataset& train, const Dataset& apply_to, std::size_t k = 10) {
  return KnnImputer::fit(train, k).transform(apply_to);
}

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> columns;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

/// One-hot encoding of nominal columns and min-max scaling of the rest, with
/// every parameter taken from the training partition.
class Preprocessor {
 public:
  struct Column {
    std::size_t feature = 0;
    std::optional<std::string> category;  // set for one-hot columns
    double min = 0.0;
    double max = 0.0;
  };

  static Preprocessor fit(const Dataset& train) {
    Preprocessor p;
    const auto& schema = train.schema();
    for (std::size_t f = 0; f < schema.feature_count(); ++f) {
      const auto& spec = schema.feature(f);
      if (spec.kind == FeatureKind::nominal) {
        for (const auto& cat : spec.categories) {
          bool observed = std::any_of(train.rows().begin(), train.rows().end(), [&](const auto& row) {
            const auto* s = std::get_if<std::string>(&row[f]);
            return s && text::fold(*s) == text::fold(cat);
          });
          if (observed) p.columns_.push_back(Column{f, cat, 0.0, 0.0});
        }
        continue;
      }
      Column col{f, std::nullopt, 0.0, 0.0};
      bool first = true;
      for (const auto& row : train.rows()) {
        const auto* d = std::get_if<double>(&row[f]);
        if (!d) throw MissingValue(spec.name);
        col.min = first ? *d : std::min(col.min, *d);
        col.max = first ? *d : std::max(col.max, *d);
        first = false;
      }
      p.columns_.push_back(col);
    }
    p.schema_ = train.schema_ptr();
    return p;
  }

  const std::vector<Column>& columns() const noexcept { return columns_; }

  DesignMatrix transform(const Dataset& data) const {
    DesignMatrix m;
    m.values.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(columns_.size()));
    for (const auto& col : columns_) {
      const auto& name = schema_->feature(col.feature).display_name();
      m.columns.push_back(col.category ? name + "=" + *col.category : name);
    }
    for (std::size_t r = 0; r < data.size(); ++r) {
      const auto& row = data.row(r);
      for (std::size_t j = 0; j < columns_.size(); ++j) {
        const auto& col = columns_[j];
        const auto& v = row[col.feature];
        if (is_missing(v)) throw MissingValue(schema_->feature(col.feature).name);
        double out = 0.0;
        if (col.category) {
          out = text::fold(std::get<std::string>(v)) == text::fold(*col.category) ? 1.0 : 0.0;
        } else {
          const double range = col.max - col.min;
          out = range > 0.0 ? (std::get<double>(v) - col.min) / range : 0.0;
        }
        m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = out;
      }
    }
    return m;
  }

 private:
  std::shared_ptr<const DatasetSchema> schema_;
  std::vector<Column> columns_;
};

inline DesignMatrix encode_and_scale(const Dataset& train, const Dataset& apply_to) {
  return Preprocessor::fit(train).transform(apply_to);
}

struct SplitPlan {
  double train_fraction = 0.67;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  bool stratify = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class training quotas: largest-remainder apportionment of
/// round(fraction * N), then clamped so each class lands in both partitions.
inline std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& class_sizes, double fraction) {
  std::size_t n = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(class_sizes[c]);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    auto c = remainders[i].second;
    if (quota[c] < class_sizes[c]) {
      ++quota[c];
      ++assigned;
    }
  }
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    if (class_sizes[c] >= 2) quota[c] = std::clamp<std::size_t>(quota[c], 1, class_sizes[c] - 1);
  }
  return quota;
}

/// `plan.repeats` train/test partitions; partition r depends only on
/// (seed, r) and the targets.
inline std::vector<SplitIndices> make_splits(const std::vector<std::size_t>& targets, std::size_t n_classes,
                                             const SplitPlan& plan) {
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < targets.size(); ++i) by_class.at(targets[i]).push_back(i);
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < n_classes; ++c) {
    sizes.push_back(by_class[c].size());
    if (plan.stratify && by_class[c].size() == 1) {
      throw TooFewSamples("class " + std::to_string(c) + " has a single sample; it cannot appear in both partitions");
    }
  }
  if (targets.size() < 2) throw TooFewSamples("need at least 2 samples to split");

  std::vector<SplitIndices> splits;
  for (std::size_t r = 0; r < plan.repeats; ++r) {
    std::mt19937_64 rng(derive_seed(plan.seed, {r}));
    SplitIndices s;
    if (plan.stratify) {
      auto quota = stratified_quotas(sizes, plan.train_fraction);
      for (std::size_t c = 0; c < n_classes; ++c) {
        auto members = by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]), members.end());
      }
    } else {
      std::vector<std::size_t> all(targets.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      std::shuffle(all.begin(), all.end(), rng);
      auto n_train = static_cast<std::size_t>(std::llround(plan.train_fraction * static_cast<double>(all.size())));
      n_train = std::clamp<std::size_t>(n_train, 1, all.size() - 1);
      s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
      s.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

inline std::vector<SplitIndices> make_splits(const Dataset& data, const SplitPlan& plan) {
  return make_splits(data.targets(), data.schema().label_count(), plan);
}

/// "repeat,partition,row" lines; deterministic for equal plans.
inline std::string splits_to_csv(const std::vector<SplitIndices>& splits) {
  std::string out = "repeat,partition,row\n";
  for (std::size_t r = 0; r < splits.size(); ++r) {
    for (auto i : splits[r].train) out += std::to_string(r) + ",train," + std::to_string(i) + "\n";
    for (auto i : splits[r].test) out += std::to_string(r) + ",test," + std::to_string(i) + "\n";
  }
  return out;
}

}  // namespace zsdt
