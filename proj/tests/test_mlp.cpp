#include <gtest/gtest.h>

#include <random>

#include "zsdt/mlp.hpp"

using namespace zsdt;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  std::vector<std::size_t> y;
  MlpParams p;
  double l2 = 0.0;
};

Problem random_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ni(2, 6), nh(2, 8), nk(2, 4), nn(5, 12);
  const std::vector<double> l2s{0.0, 1e-3, 0.1, 1.0};
  std::uniform_int_distribution<std::size_t> pl(0, l2s.size() - 1);
  Problem pr;
  const auto in = ni(rng), hid = nh(rng), k = nk(rng), n = nn(rng);
  std::normal_distribution<double> g;
  pr.x.resize(n, in);
  for (Eigen::Index i = 0; i < pr.x.size(); ++i) pr.x.data()[i] = g(rng);
  std::uniform_int_distribution<std::size_t> lab(0, static_cast<std::size_t>(k - 1));
  for (int i = 0; i < n; ++i) pr.y.push_back(lab(rng));
  pr.p = mlp_init(in, hid, k, rng());
  pr.l2 = l2s[pl(rng)];
  return pr;
}

double numeric_loss(const Problem& pr, const Eigen::VectorXd& theta) {
  auto q = pr.p;
  q.unflatten(theta);
  return mlp_loss_and_gradient(q, pr.x, pr.y, pr.l2).loss;
}

}  // namespace

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 25; ++c) {
    auto pr = random_problem(rng);
    auto analytic = mlp_loss_and_gradient(pr.p, pr.x, pr.y, pr.l2).gradient.flatten();
    Eigen::VectorXd theta = pr.p.flatten(), numeric(theta.size());
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      auto up = theta, down = theta;
      up[i] += eps;
      down[i] -= eps;
      numeric[i] = (numeric_loss(pr, up) - numeric_loss(pr, down)) / (2 * eps);
    }
    const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
    EXPECT_LT(rel, 1e-4) << "config " << c;
  }
}

TEST(Mlp, LossMatchesDirectFormula) {
  std::mt19937_64 rng(3);
  auto pr = random_problem(rng);
  auto probs = softmax_rows(mlp_logits(pr.p, pr.x));
  double ce = 0.0;
  for (std::size_t i = 0; i < pr.y.size(); ++i) ce -= std::log(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pr.y[i])));
  ce /= static_cast<double>(pr.y.size());
  const double want = ce + pr.l2 * (pr.p.w1.squaredNorm() + pr.p.w2.squaredNorm());
  EXPECT_NEAR(mlp_loss_and_gradient(pr.p, pr.x, pr.y, pr.l2).loss, want, 1e-12);
}

TEST(Mlp, SoftmaxRowsSumToOne) {
  Eigen::MatrixXd z(3, 4);
  z << 1, 2, 3, 4, -1000, 0, 1000, 5, 0, 0, 0, 0;
  auto p = softmax_rows(z);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-15);
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p(2, 0), 0.25, 1e-15);
}

TEST(Mlp, ArgmaxTiesGoToLowestIndex) {
  Eigen::MatrixXd s(2, 3);
  s << 1, 1, 0, 0, 2, 2;
  EXPECT_EQ(argmax_rows(s), (std::vector<std::size_t>{0, 1}));
}

TEST(Mlp, LearnsSeparableBlobs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::MatrixXd x(120, 2);
  std::vector<std::size_t> y;
  for (int i = 0; i < 120; ++i) {
    const std::size_t c = static_cast<std::size_t>(i % 3);
    x(i, 0) = g(rng) + (c == 1 ? 3.0 : 0.0);
    x(i, 1) = g(rng) + (c == 2 ? 3.0 : 0.0);
    y.push_back(c);
  }
  MlpConfig cfg;
  cfg.hidden_size = 10;
  cfg.learning_rate = 0.5;
  auto model = mlp_fit(x, y, 3, cfg);
  EXPECT_EQ(mlp_predict(model, x), y);
  EXPECT_LT(model.loss_history.back(), model.loss_history.front());
}

TEST(Mlp, StrongerPenaltyShrinksWeights) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(40, 3);
  std::vector<std::size_t> y;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = g(rng);
    y.push_back(x(i, 0) + x(i, 1) > 0 ? 1 : 0);
  }
  double previous = std::numeric_limits<double>::infinity();
  for (double l2 : {0.0, 0.01, 0.1, 1.0}) {
    MlpConfig cfg;
    cfg.hidden_size = 8;
    cfg.l2_strength = l2;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 3000;
    cfg.plateau_tolerance = 0.0;
    const double norm = mlp_fit(x, y, 2, cfg).params.weight_norm_sq();
    EXPECT_LT(norm, previous) << l2;
    previous = norm;
  }
}

TEST(Mlp, DeterministicForSeed) {
  Eigen::MatrixXd x(6, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1, 0.5, 0.5, 0.2, 0.9;
  std::vector<std::size_t> y{0, 1, 1, 0, 1, 0};
  MlpConfig cfg;
  cfg.max_epochs = 50;
  auto a = mlp_fit(x, y, 2, cfg);
  auto b = mlp_fit(x, y, 2, cfg);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  cfg.seed = 1;
  EXPECT_NE(mlp_fit(x, y, 2, cfg).params.flatten(), a.params.flatten());
}

TEST(Mlp, JsonRoundTrip) {
  std::mt19937_64 rng(7);
  auto pr = random_problem(rng);
  MlpModel m{pr.p, {}};
  auto back = MlpModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.params.flatten(), m.params.flatten());
  EXPECT_EQ(m.to_json()["activation"], "relu");
}

TEST(Mlp, InputErrors) {
  Eigen::MatrixXd x(2, 1);
  x << 0, 1;
  EXPECT_THROW(mlp_fit(x, {0}, 2, {}), DimensionMismatch);
  EXPECT_THROW(mlp_fit(x, {0, 0}, 2, {}), TooFewSamples);
  EXPECT_THROW(mlp_fit(x, {0, 3}, 2, {}), DimensionMismatch);
  MlpConfig zero;
  zero.hidden_size = 0;
  EXPECT_THROW(mlp_fit(x, {0, 1}, 2, zero), ConfigError);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(mlp_fit(bad, {0, 1}, 2, {}), NonFiniteLoss);
  MlpConfig wild;
  wild.learning_rate = 1e200;
  Eigen::MatrixXd big(2, 1);
  big << 1e6, -1e6;
  EXPECT_THROW(mlp_fit(big, {0, 1}, 2, wild), NonFiniteLoss);
  auto model = mlp_fit(x, {0, 1}, 2, {});
  EXPECT_THROW(mlp_predict(model, Eigen::MatrixXd(2, 3)), DimensionMismatch);
}

TEST(Mlp, GridOrder) {
  auto grid = mlp_grid({}, default_hidden_sizes(), default_l2_strengths());
  ASSERT_EQ(grid.size(), 25u);
  EXPECT_EQ(grid[1].hidden_size, 10u);
  EXPECT_EQ(grid[1].l2_strength, 1e-3);
  EXPECT_EQ(grid[5].hidden_size, 25u);
}
