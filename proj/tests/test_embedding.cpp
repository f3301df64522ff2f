#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "zsdt/embedding.hpp"

using namespace zsdt;

namespace {
ZeroShotForest random_forest(std::mt19937_64& rng, const DatasetSchema& schema, std::size_t m) {
  ZeroShotForest f;
  for (std::size_t t = 0; t < m; ++t) f.trees.push_back(fx::random_tree(rng, schema, 4));
  return f;
}
}  // namespace

TEST(Embedding, IrisTreeExample) {
  ZeroShotForest f;
  f.trees.push_back(*parse_tree(TreeText::from_string(fx::k_listing_tree)));
  auto e = embed(f, Sample{{"petal width (cm)", 1.70}});
  EXPECT_EQ(e.bits, (std::vector<std::uint8_t>{0, 1}));
}

TEST(Embedding, ConcatenationOfTruthVectors) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    auto schema = fx::random_schema(rng, 6);
    std::uniform_int_distribution<std::size_t> pm(1, 6);
    auto forest = random_forest(rng, schema, pm(rng));
    auto s = fx::make_sample(schema, fx::random_row(rng, schema));
    auto e = embed(forest, s);
    ASSERT_EQ(e.size(), forest.total_inner_nodes());
    for (std::size_t t = 0; t < forest.size(); ++t) {
      auto tv = truth_vector(forest.trees[t], s);
      auto seg = e.segment(t);
      ASSERT_EQ(std::vector<std::uint8_t>(seg.begin(), seg.end()), tv);
    }
  }
}

TEST(Embedding, AugmentExtendAndReplace) {
  std::mt19937_64 rng(4);
  auto schema = std::make_shared<const DatasetSchema>(fx::random_schema(rng, 5));
  auto data = fx::random_dataset(rng, schema, 12);
  auto forest = random_forest(rng, *schema, 3);
  auto design = Preprocessor::fit(data).transform(data);
  auto ext = augment(design, data, forest, AugmentMode::extend);
  auto rep = augment(design, data, forest, AugmentMode::replace);
  const auto width = forest.total_inner_nodes();
  EXPECT_EQ(ext.cols(), design.cols() + width);
  EXPECT_EQ(rep.cols(), width);
  EXPECT_EQ(ext.values.leftCols(design.values.cols()), design.values);
  EXPECT_EQ(ext.values.rightCols(static_cast<Eigen::Index>(width)), rep.values);
  EXPECT_EQ(rep.columns, embedding_column_names(forest));
  auto fewer = data.subset({0, 1});
  EXPECT_THROW(augment(design, fewer, forest, AugmentMode::extend), DimensionMismatch);
}

TEST(Embedding, ForestJsonRoundTrip) {
  std::mt19937_64 rng(12);
  auto schema = fx::random_schema(rng, 5);
  auto forest = random_forest(rng, schema, 4);
  forest.provenance.assign(4, {"fixture", 1, "raw"});
  auto back = forest_from_json(nlohmann::json::parse(to_json(forest).dump()));
  EXPECT_EQ(back.trees, forest.trees);
  ASSERT_EQ(back.provenance.size(), 4u);
  EXPECT_EQ(back.provenance[2].provider, "fixture");
}

TEST(Embedding, SampleForestUsesDistinctDraws) {
  auto schema = fx::iris_schema();
  auto mock = std::make_shared<FixtureProvider>(std::vector<std::string>{fx::k_listing_tree});
  LlmClient client(ProviderConfig{}, mock);
  auto spec = PromptSpec::from_schema(schema, "the species of iris", std::nullopt);
  auto forest = sample_forest(spec, schema, client, 5, {}, 10);
  EXPECT_EQ(forest.size(), 5u);
  EXPECT_EQ(forest.total_inner_nodes(), 10u);
  EXPECT_EQ(forest.offsets(), (std::vector<std::size_t>{0, 2, 4, 6, 8, 10}));
  EXPECT_THROW(sample_forest(spec, schema, client, 0), ConfigError);
}

TEST(Embedding, CsvExport) {
  auto schema = std::make_shared<const DatasetSchema>(fx::iris_schema());
  Dataset d(schema, {{5.0, 3.0, 1.0, 0.2}, {6.0, 3.0, 4.0, 1.7}}, {0, 1});
  ZeroShotForest f;
  f.trees.push_back(*parse_tree(TreeText::from_string(fx::k_listing_tree)));
  auto csv = embedding_to_csv(d, f);
  EXPECT_NE(csv.find("emb_0_0,emb_0_1"), std::string::npos) << csv;
}
