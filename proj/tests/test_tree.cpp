#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "zsdt/tree.hpp"
#include "zsdt/tree_text.hpp"

using namespace zsdt;

namespace {
DecisionTree listing_tree() { return *parse_tree(TreeText::from_string(fx::k_listing_tree)); }
}  // namespace

TEST(Tree, IrisTreeStructure) {
  auto t = listing_tree();
  EXPECT_EQ(t.inner_node_count(), 2u);
  EXPECT_EQ(t.leaf_count(), 3u);
  EXPECT_EQ(t.depth(), 2u);
  EXPECT_EQ(t.features(), (std::vector<std::string>{"petal width (cm)"}));
  EXPECT_EQ(t.node_order(), (std::vector<std::size_t>{0, 2}));
}

TEST(Tree, TruthVectorOfIrisTree) {
  auto t = listing_tree();
  Sample s{{"petal width (cm)", 1.70}};
  EXPECT_EQ(truth_vector(t, s), (std::vector<std::uint8_t>{0, 1}));
  EXPECT_EQ(predict(t, s), "versicolor");
}

TEST(Tree, TruthVectorEvaluatesOffPathNodes) {
  auto t = listing_tree();
  Sample s{{"petal width (cm)", 0.5}};
  EXPECT_EQ(predict(t, s), "setosa");
  EXPECT_EQ(truth_vector(t, s), (std::vector<std::uint8_t>{1, 1}));
  Sample big{{"petal width", 2.0}};
  EXPECT_EQ(truth_vector(t, big), (std::vector<std::uint8_t>{0, 0}));
  EXPECT_EQ(predict(t, big), "virginica");
}

TEST(Tree, BoundaryGoesToLessEqualBranch) {
  auto t = listing_tree();
  EXPECT_EQ(predict(t, Sample{{"petal width (cm)", 0.80}}), "setosa");
  EXPECT_EQ(predict(t, Sample{{"petal width (cm)", 1.75}}), "versicolor");
}

TEST(Tree, MissingAndUnknownFeatures) {
  auto t = listing_tree();
  EXPECT_THROW(predict(t, Sample{{"petal width (cm)", std::monostate{}}}), MissingValue);
  EXPECT_THROW(predict(t, Sample{{"sepal width (cm)", 1.0}}), UnknownFeature);
  EXPECT_THROW(truth_vector(t, Sample{{"sepal width (cm)", 1.0}}), UnknownFeature);
}

TEST(Tree, PredicateSemantics) {
  Predicate eq{"smoker", Comparator::eq, std::string("Yes")};
  EXPECT_TRUE(eq.holds(std::string("yes")));
  EXPECT_FALSE(eq.holds(std::string("no")));
  Predicate ne{"smoker", Comparator::ne, std::string("yes")};
  EXPECT_TRUE(ne.holds(std::string("no")));
  Predicate lt{"smoker", Comparator::lt, 3.0};
  EXPECT_FALSE(lt.holds(std::string("yes")));  // ordering on a category never holds
  Predicate num_eq{"x", Comparator::eq, 2.0};
  EXPECT_TRUE(num_eq.holds(2.0));
  EXPECT_FALSE(num_eq.holds(2.0000001));
  for (auto op : {Comparator::le, Comparator::lt, Comparator::ge, Comparator::gt, Comparator::eq, Comparator::ne}) {
    for (double v : {1.0, 2.0, 3.0}) {
      Predicate p{"x", op, 2.0};
      Predicate q{"x", complement(op), 2.0};
      EXPECT_NE(p.holds(v), q.holds(v));
    }
  }
}

// Brute-force equivalence over all 2^5 binary inputs.
TEST(Tree, PredictMatchesNestedConditionals) {
  std::vector<FeatureSpec> f;
  for (int i = 0; i < 5; ++i) f.push_back({"b" + std::to_string(i), FeatureKind::numeric, {}, {}});
  DatasetSchema schema(f, {"y", {"n", "p", "q"}});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto tree = fx::random_tree(rng, schema, 4);
    for (int mask = 0; mask < 32; ++mask) {
      std::vector<Value> row;
      for (int b = 0; b < 5; ++b) row.emplace_back(double((mask >> b) & 1));
      auto s = fx::make_sample(schema, row);
      ASSERT_EQ(predict(tree, s), fx::oracle_predict(tree, s));
    }
  }
}

// Leaf reached by predict is consistent with the truth vector along its path.
TEST(Tree, PathConsistency) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto schema = fx::random_schema(rng, 6);
    auto tree = fx::random_tree(rng, schema, 5);
    auto s = fx::make_sample(schema, fx::random_row(rng, schema));
    auto bits = truth_vector(tree, s);
    ASSERT_EQ(bits.size(), tree.inner_node_count());
    std::size_t i = 0;
    while (const auto* split = std::get_if<DecisionTree::Split>(&tree.node(i))) {
      auto pos = std::find(tree.node_order().begin(), tree.node_order().end(), i) - tree.node_order().begin();
      i = bits[static_cast<std::size_t>(pos)] ? split->true_child : split->false_child;
    }
    ASSERT_EQ(i, predict_leaf(tree, s));
  }
}

TEST(Tree, Validation) {
  auto schema = fx::iris_schema();
  auto t = listing_tree();
  EXPECT_TRUE(validate(t, schema).valid());
  EXPECT_TRUE(validate(t, schema, 2).valid());
  auto deep = validate(t, schema, 1);
  EXPECT_TRUE(deep.has(ViolationKind::depth_exceeded));

  auto bad = DecisionTree::split({"petal area", Comparator::le, 1.0}, DecisionTree::leaf("setosa"),
                                 DecisionTree::leaf("rose"));
  auto r = validate(bad, schema);
  EXPECT_TRUE(r.has(ViolationKind::unknown_feature));
  EXPECT_TRUE(r.has(ViolationKind::unknown_label));
  EXPECT_FALSE(r.valid());

  DatasetSchema mixed({{"smoker", FeatureKind::nominal, {}, {"yes", "no"}}, {"age", FeatureKind::numeric, "years", {}}},
                      {"y", {"a", "b"}});
  auto ord = DecisionTree::split({"smoker", Comparator::le, 1.0}, DecisionTree::leaf("a"), DecisionTree::leaf("b"));
  EXPECT_TRUE(validate(ord, mixed).has(ViolationKind::kind_mismatch));
  auto cat = DecisionTree::split({"age", Comparator::eq, std::string("old")}, DecisionTree::leaf("a"),
                                 DecisionTree::leaf("b"));
  EXPECT_TRUE(validate(cat, mixed).has(ViolationKind::kind_mismatch));
  auto unk = DecisionTree::split({"smoker", Comparator::eq, std::string("maybe")}, DecisionTree::leaf("a"),
                                 DecisionTree::leaf("b"));
  EXPECT_TRUE(validate(unk, mixed).has(ViolationKind::unknown_category));
}

TEST(Tree, JsonRoundTrip) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    auto schema = fx::random_schema(rng, 6);
    auto tree = fx::random_tree(rng, schema, 5);
    auto j = to_json(tree);
    ASSERT_EQ(tree_from_json(nlohmann::json::parse(j.dump())), tree);
  }
  auto leaf = tree_from_json(nlohmann::json::parse(R"({"class": "a"})"));
  EXPECT_EQ(leaf.leaf_count(), 1u);
  EXPECT_THROW(tree_from_json(nlohmann::json::parse(R"({"predicate": {"feature": "x", "op": "<=", "value": 1}})")),
               SchemaError);
}

TEST(Tree, JsonRejectsExcessiveNesting) {
  nlohmann::json j{{"class", "a"}};
  for (int i = 0; i < 600; ++i) {
    j = nlohmann::json{{"predicate", {{"feature", "x"}, {"op", "<="}, {"value", 1.0}}}, {"true", j}, {"false", {{"class", "b"}}}};
  }
  EXPECT_THROW(tree_from_json(j), SchemaError);
}
