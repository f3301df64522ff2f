#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"
#include "zsdt/tabular.hpp"

using namespace zsdt;

namespace {
std::shared_ptr<const DatasetSchema> mixed_schema() {
  return std::make_shared<const DatasetSchema>(
      std::vector<FeatureSpec>{{"age", FeatureKind::numeric, "years", {}},
                               {"smoker", FeatureKind::nominal, {}, {"yes", "no"}},
                               {"grade", FeatureKind::ordinal, {}, {"low", "mid", "high"}}},
      TargetSpec{"sick", {"no", "yes"}});
}
}  // namespace

TEST(Tabular, CsvParsing) {
  auto recs = parse_csv("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\r\n3,\n");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1][0], "x, y");
  EXPECT_EQ(recs[1][1], "he said \"hi\"");
  EXPECT_EQ(recs[2], (std::vector<std::string>{"3", ""}));
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(Tabular, DatasetFromCsv) {
  auto d = parse_dataset_csv("sick,Age (years),smoker,grade\nyes,50,Yes,high\nno,?,no,1\nno,40,, low\n", mixed_schema());
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.targets(), (std::vector<std::size_t>{1, 0, 0}));
  EXPECT_EQ(std::get<double>(d.row(0)[0]), 50.0);
  EXPECT_EQ(std::get<std::string>(d.row(0)[1]), "yes");
  EXPECT_EQ(std::get<double>(d.row(0)[2]), 2.0);  // ordinal codes
  EXPECT_EQ(std::get<double>(d.row(1)[2]), 1.0);  // code given directly
  EXPECT_TRUE(is_missing(d.row(1)[0]));
  EXPECT_TRUE(is_missing(d.row(2)[1]));
  EXPECT_EQ(d.missing_count(), 2u);
  EXPECT_EQ(d.sample(0).at("age (years)"), Value(50.0));
}

TEST(Tabular, CsvErrors) {
  EXPECT_THROW(parse_dataset_csv("age,smoker,grade\n1,yes,low\n", mixed_schema()), SchemaMismatch);
  EXPECT_THROW(parse_dataset_csv("sick,age,smoker,grade,extra\nno,1,yes,low,9\n", mixed_schema()), SchemaMismatch);
  EXPECT_THROW(parse_dataset_csv("sick,age,smoker,grade\nno,old,yes,low\n", mixed_schema()), CellTypeError);
  EXPECT_THROW(parse_dataset_csv("sick,age,smoker,grade\nno,1,maybe,low\n", mixed_schema()), CellTypeError);
  EXPECT_THROW(parse_dataset_csv("sick,age,smoker,grade\nperhaps,1,yes,low\n", mixed_schema()), CellTypeError);
  EXPECT_THROW(parse_dataset_csv("sick,age,smoker,grade\nno,1,yes\n", mixed_schema()), CellTypeError);
}

TEST(Tabular, BundledDatasetsLoad) {
  auto toy = load_csv(fx::source_dir() / "data/toy/toy.csv", fx::source_dir() / "data/toy/toy.schema.json");
  EXPECT_EQ(toy.size(), 60u);
  EXPECT_EQ(toy.missing_count(), 5u);
  auto thr = load_csv(fx::source_dir() / "data/thresholds/thresholds.csv",
                      fx::source_dir() / "data/thresholds/thresholds.schema.json");
  EXPECT_EQ(thr.size(), 240u);
  // hand decision rule reproduces every label
  for (std::size_t i = 0; i < thr.size(); ++i) {
    const auto a = std::get<double>(thr.row(i)[0]);
    const auto b = std::get<double>(thr.row(i)[1]);
    ASSERT_EQ(thr.targets()[i], a > 6.5 && b > 3.0 ? 1u : 0u);
  }
}

TEST(Tabular, KnnMatchesOracle) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    auto schema = std::make_shared<const DatasetSchema>(fx::random_schema(rng, 6));
    auto train = fx::random_dataset(rng, schema, 40, 0.1);
    auto test = fx::random_dataset(rng, schema, 15, 0.1);
    bool all_missing = false;
    for (std::size_t c = 0; c < schema->feature_count(); ++c) {
      std::size_t seen = 0;
      for (const auto& r : train.rows()) seen += !is_missing(r[c]);
      all_missing |= seen == 0;
    }
    if (all_missing) continue;
    for (std::size_t k : {1, 3, 10}) {
      auto imp = KnnImputer::fit(train, k);
      ASSERT_EQ(imp.transform(test).rows(), fx::knn_oracle(train, test, k));
      ASSERT_EQ(imp.transform(train).rows(), fx::knn_oracle(train, train, k));
    }
  }
}

TEST(Tabular, KnnHandCase) {
  auto schema = std::make_shared<const DatasetSchema>(
      std::vector<FeatureSpec>{{"x", FeatureKind::numeric, {}, {}}, {"y", FeatureKind::numeric, {}, {}}},
      TargetSpec{"t", {"a"}});
  Dataset train(schema, {{0.0, 0.0}, {1.0, 10.0}, {10.0, 100.0}}, {0, 0, 0});
  Dataset query(schema, {{0.9, std::monostate{}}}, {0});
  auto out = impute_knn(train, query, 2);
  EXPECT_EQ(std::get<double>(out.row(0)[1]), 5.0);
}

TEST(Tabular, AllMissingColumnThrows) {
  auto schema = std::make_shared<const DatasetSchema>(
      std::vector<FeatureSpec>{{"x", FeatureKind::numeric, {}, {}}}, TargetSpec{"t", {"a"}});
  Dataset train(schema, {{std::monostate{}}, {std::monostate{}}}, {0, 0});
  auto imp = KnnImputer::fit(train, 3);
  EXPECT_THROW(imp.transform(train), AllMissingColumn);
}

TEST(Tabular, PreprocessorEncodesAndScales) {
  Dataset train(mixed_schema(), {{20.0, std::string("yes"), 0.0}, {60.0, std::string("no"), 2.0}}, {0, 1});
  auto p = Preprocessor::fit(train);
  Dataset test(mixed_schema(), {{40.0, std::string("no"), 1.0}, {80.0, std::string("yes"), 2.0}}, {0, 0});
  auto m = p.transform(test);
  EXPECT_EQ(m.columns, (std::vector<std::string>{"age (years)", "smoker=yes", "smoker=no", "grade"}));
  EXPECT_EQ(m.values(0, 0), 0.5);
  EXPECT_EQ(m.values(1, 0), 1.5);  // test values are not clipped
  EXPECT_EQ(m.values(0, 1), 0.0);
  EXPECT_EQ(m.values(0, 2), 1.0);
  EXPECT_EQ(m.values(0, 3), 0.5);
  Dataset gap(mixed_schema(), {{std::monostate{}, std::string("no"), 1.0}}, {0});
  EXPECT_THROW(p.transform(gap), MissingValue);
}

// Fitted state is unchanged when test-partition rows are rewritten.
TEST(Tabular, LeakageGuard) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto schema = std::make_shared<const DatasetSchema>(fx::random_schema(rng, 5));
    auto full = fx::random_dataset(rng, schema, 50, 0.05, 3);
    auto split = make_splits(full, {0.67, 1, std::uint64_t(trial), true}).front();
    auto other = fx::random_dataset(rng, schema, full.size(), 0.3);
    auto rows = full.rows();
    for (auto i : split.test) rows[i] = other.row(i);
    Dataset altered(schema, rows, full.targets());

    auto train_a = full.subset(split.train);
    auto train_b = altered.subset(split.train);
    bool empty_column = false;
    for (std::size_t c = 0; c < schema->feature_count(); ++c) {
      bool seen = false;
      for (const auto& r : train_a.rows()) seen |= !is_missing(r[c]);
      empty_column |= !seen;
    }
    if (empty_column) continue;
    auto imp_a = KnnImputer::fit(train_a, 5);
    auto imp_b = KnnImputer::fit(train_b, 5);
    ASSERT_EQ(imp_a.mins(), imp_b.mins());
    ASSERT_EQ(imp_a.maxs(), imp_b.maxs());
    auto test_b = altered.subset(split.test);
    for (std::size_t r = 0; r < test_b.size(); ++r) {
      for (std::size_t c = 0; c < schema->feature_count(); ++c) {
        ASSERT_EQ(imp_a.neighbors(test_b.row(r), c), imp_b.neighbors(test_b.row(r), c));
      }
    }
    auto clean_a = imp_a.transform(train_a);
    auto clean_b = imp_b.transform(train_b);
    ASSERT_EQ(clean_a.rows(), clean_b.rows());
    auto pre_a = Preprocessor::fit(clean_a);
    auto pre_b = Preprocessor::fit(clean_b);
    ASSERT_EQ(pre_a.columns().size(), pre_b.columns().size());
    for (std::size_t j = 0; j < pre_a.columns().size(); ++j) {
      ASSERT_EQ(pre_a.columns()[j].category, pre_b.columns()[j].category);
      ASSERT_EQ(pre_a.columns()[j].min, pre_b.columns()[j].min);
      ASSERT_EQ(pre_a.columns()[j].max, pre_b.columns()[j].max);
    }
  }
}

TEST(Tabular, StratifiedSplits) {
  std::vector<std::size_t> y;
  for (int i = 0; i < 30; ++i) y.push_back(0);
  for (int i = 0; i < 10; ++i) y.push_back(1);
  for (int i = 0; i < 3; ++i) y.push_back(2);
  SplitPlan plan{0.67, 5, 42, true};
  auto splits = make_splits(y, 3, plan);
  ASSERT_EQ(splits.size(), 5u);
  std::set<std::vector<std::size_t>> distinct;
  for (const auto& s : splits) {
    EXPECT_EQ(s.train.size() + s.test.size(), y.size());
    EXPECT_EQ(s.train.size(), 29u);  // round(0.67 * 43)
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
    std::vector<std::size_t> count(3);
    for (auto i : s.train) ++count[y[i]];
    EXPECT_EQ(count, (std::vector<std::size_t>{20, 7, 2}));
    distinct.insert(s.train);
  }
  EXPECT_GT(distinct.size(), 1u);
  EXPECT_EQ(splits_to_csv(splits), splits_to_csv(make_splits(y, 3, plan)));
  EXPECT_EQ(stratified_quotas({30, 10, 3}, 0.67), (std::vector<std::size_t>{20, 7, 2}));
  plan.train_fraction = 1.0;
  EXPECT_THROW(make_splits(y, 3, plan), ConfigError);
  EXPECT_THROW(make_splits({0, 0, 1}, 2, SplitPlan{}), TooFewSamples);
}
