#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "zsdt/error.hpp"

namespace zsdt {

/// One-hidden-layer ReLU network trained by full-batch gradient descent on
/// mean cross-entropy + l2_strength * (|W1|^2 + |W2|^2). Biases are not
/// penalised.
struct MlpConfig {
  std::size_t hidden_size = 100;
  double l2_strength = 1e-4;
  double learning_rate = 0.01;
  std::size_t max_epochs = 2000;
  std::uint64_t seed = 0;
  double plateau_tolerance = 1e-6;  // stop when the loss drops less than this...
  std::size_t plateau_window = 20;  // ...over this many epochs

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

inline const std::vector<std::size_t>& default_hidden_sizes() {
  static const std::vector<std::size_t> sizes{10, 25, 50, 75, 100};
  return sizes;
}

inline const std::vector<double>& default_l2_strengths() {
  static const std::vector<double> strengths{0.0001, 0.001, 0.01, 0.1, 1.0};
  return strengths;
}

/// Hidden size outer, regularisation strength inner.
inline std::vector<MlpConfig> mlp_grid(const MlpConfig& base,
                                       const std::vector<std::size_t>& hidden_sizes = default_hidden_sizes(),
                                       const std::vector<double>& l2_strengths = default_l2_strengths()) {
  std::vector<MlpConfig> grid;
  for (auto h : hidden_sizes) {
    for (auto l2 : l2_strengths) {
      MlpConfig c = base;
      c.hidden_size = h;
      c.l2_strength = l2;
      grid.push_back(c);
    }
  }
  return grid;
}

struct MlpParams {
  Eigen::MatrixXd w1;  // inputs x hidden
  Eigen::RowVectorXd b1;
  Eigen::MatrixXd w2;  // hidden x classes
  Eigen::RowVectorXd b2;

  Eigen::Index inputs() const { return w1.rows(); }
  Eigen::Index hidden() const { return w1.cols(); }
  Eigen::Index classes() const { return w2.cols(); }

  double weight_norm_sq() const { return w1.squaredNorm() + w2.squaredNorm(); }

  /// Flattened view order: w1, b1, w2, b2 (column-major within matrices).
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(w1.size() + b1.size() + w2.size() + b2.size());
    v << Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size()), b1.transpose(),
        Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size()), b2.transpose();
    return v;
  }

  void unflatten(const Eigen::VectorXd& v) {
    Eigen::Index o = 0;
    w1 = Eigen::Map<const Eigen::MatrixXd>(v.data() + o, w1.rows(), w1.cols());
    o += w1.size();
    b1 = v.segment(o, b1.size()).transpose();
    o += b1.size();
    w2 = Eigen::Map<const Eigen::MatrixXd>(v.data() + o, w2.rows(), w2.cols());
    o += w2.size();
    b2 = v.segment(o, b2.size()).transpose();
  }
};

inline MlpParams mlp_init(Eigen::Index inputs, Eigen::Index hidden, Eigen::Index classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::Index fan_in, Eigen::Index fan_out, auto& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
  };
  MlpParams p;
  p.w1.resize(inputs, hidden);
  p.b1.resize(hidden);
  p.w2.resize(hidden, classes);
  p.b2.resize(classes);
  fill(inputs, hidden, p.w1);
  fill(inputs, hidden, p.b1);
  fill(hidden, classes, p.w2);
  fill(hidden, classes, p.b2);
  return p;
}

/// Row-wise softmax of logits.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p = z.colwise() - z.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

inline Eigen::MatrixXd mlp_logits(const MlpParams& p, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = (x * p.w1).rowwise() + p.b1;
  a = a.cwiseMax(0.0);
  return (a * p.w2).rowwise() + p.b2;
}

struct LossAndGradient {
  double loss = 0.0;
  MlpParams gradient;
};

/// Buffers reused across epochs.
struct MlpWorkspace {
  Eigen::MatrixXd pre, hidden, logits, dpre;
  Eigen::VectorXd lse;
};

/// Objective and its analytic gradient by backpropagation, written into
/// `out` using `ws` for intermediates.
inline double mlp_loss_and_gradient(const MlpParams& p, const Eigen::MatrixXd& x, const std::vector<std::size_t>& y,
                                    double l2_strength, MlpWorkspace& ws, MlpParams& out) {
  const auto n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  ws.pre.noalias() = x * p.w1;
  ws.pre.rowwise() += p.b1;
  ws.hidden = ws.pre.cwiseMax(0.0);
  ws.logits.noalias() = ws.hidden * p.w2;
  ws.logits.rowwise() += p.b2;

  // logits -> log-softmax -> (softmax - onehot) / n
  ws.logits.colwise() -= ws.logits.rowwise().maxCoeff();
  ws.lse = ws.logits.array().exp().rowwise().sum().log().matrix();
  ws.logits.colwise() -= ws.lse;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) ce -= ws.logits(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]));
  ws.logits = ws.logits.array().exp();
  for (Eigen::Index i = 0; i < n; ++i) ws.logits(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) -= 1.0;
  ws.logits *= inv_n;
  const auto& dz = ws.logits;

  out.w2.noalias() = ws.hidden.transpose() * dz;
  out.w2 += 2.0 * l2_strength * p.w2;
  out.b2 = dz.colwise().sum();
  ws.dpre.noalias() = dz * p.w2.transpose();
  ws.dpre.array() *= (ws.pre.array() > 0.0).cast<double>();
  out.w1.noalias() = x.transpose() * ws.dpre;
  out.w1 += 2.0 * l2_strength * p.w1;
  out.b1 = ws.dpre.colwise().sum();
  return ce * inv_n + l2_strength * p.weight_norm_sq();
}

inline LossAndGradient mlp_loss_and_gradient(const MlpParams& p, const Eigen::MatrixXd& x,
                                             const std::vector<std::size_t>& y, double l2_strength) {
  MlpWorkspace ws;
  LossAndGradient out;
  out.loss = mlp_loss_and_gradient(p, x, y, l2_strength, ws, out.gradient);
  return out;
}

struct MlpModel {
  MlpParams params;
  std::vector<double> loss_history;

  std::size_t inputs() const { return static_cast<std::size_t>(params.inputs()); }
  std::size_t classes() const { return static_cast<std::size_t>(params.classes()); }

  nlohmann::json to_json() const {
    auto row_major = [](const auto& m) {
      std::vector<double> v;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
      }
      return v;
    };
    return {{"inputs", params.inputs()},        {"hidden", params.hidden()},
            {"classes", params.classes()},      {"activation", "relu"},
            {"w1", row_major(params.w1)},       {"b1", row_major(params.b1)},
            {"w2", row_major(params.w2)},       {"b2", row_major(params.b2)}};
  }

  static MlpModel from_json(const nlohmann::json& j) {
    const auto in = j.at("inputs").get<Eigen::Index>();
    const auto hid = j.at("hidden").get<Eigen::Index>();
    const auto k = j.at("classes").get<Eigen::Index>();
    auto read = [&j](const char* key, Eigen::Index rows, Eigen::Index cols, auto& m) {
      auto v = j.at(key).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw SchemaError(std::string("bad shape for ") + key);
      m.resize(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = v[static_cast<std::size_t>(i * cols + c)];
      }
    };
    MlpModel model;
    read("w1", in, hid, model.params.w1);
    read("b1", 1, hid, model.params.b1);
    read("w2", hid, k, model.params.w2);
    read("b2", 1, k, model.params.b2);
    return model;
  }
};

inline MlpModel mlp_fit(const Eigen::MatrixXd& x, const std::vector<std::size_t>& y, std::size_t n_classes,
                        const MlpConfig& config) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DimensionMismatch("rows and labels differ");
  if (!x.allFinite()) throw NonFiniteLoss("design matrix contains non-finite values");
  std::vector<bool> present(n_classes, false);
  for (auto c : y) {
    if (c >= n_classes) throw DimensionMismatch("label index out of range");
    present[c] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) throw TooFewSamples("mlp_fit needs at least two classes");
  if (config.hidden_size == 0) throw ConfigError("hidden_size must be positive");

  MlpModel model;
  model.params = mlp_init(x.cols(), static_cast<Eigen::Index>(config.hidden_size),
                          static_cast<Eigen::Index>(n_classes), config.seed);
  auto& p = model.params;
  MlpWorkspace ws;
  MlpParams grad;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double loss = mlp_loss_and_gradient(p, x, y, config.l2_strength, ws, grad);
    if (!std::isfinite(loss)) {
      throw NonFiniteLoss("loss became non-finite at epoch " + std::to_string(epoch) + " (learning rate " +
                          std::to_string(config.learning_rate) + ", l2 " + std::to_string(config.l2_strength) + ")");
    }
    model.loss_history.push_back(loss);
    const auto& h = model.loss_history;
    if (h.size() > config.plateau_window &&
        h[h.size() - 1 - config.plateau_window] - h.back() < config.plateau_tolerance) {
      break;
    }
    p.w1 -= config.learning_rate * grad.w1;
    p.b1 -= config.learning_rate * grad.b1;
    p.w2 -= config.learning_rate * grad.w2;
    p.b2 -= config.learning_rate * grad.b2;
  }
  return model;
}

inline Eigen::MatrixXd mlp_predict_proba(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.params.inputs()) {
    throw DimensionMismatch("model expects " + std::to_string(model.params.inputs()) + " columns, got " +
                            std::to_string(x.cols()));
  }
  return softmax_rows(mlp_logits(model.params, x));
}

/// Argmax of the logits; exact ties go to the lowest class index.
inline std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

inline std::vector<std::size_t> mlp_predict(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.params.inputs()) {
    throw DimensionMismatch("model expects " + std::to_string(model.params.inputs()) + " columns, got " +
                            std::to_string(x.cols()));
  }
  return argmax_rows(mlp_logits(model.params, x));
}

}  // namespace zsdt
