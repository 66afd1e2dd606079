// Copyright 2026 The cfmia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <variant>
#include <vector>

#include "cfmia/common.hpp"
#include "cfmia/cost.hpp"
#include "cfmia/data.hpp"
#include "cfmia/layers.hpp"
#include "cfmia/rng.hpp"

namespace cfmia {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before taking
// logs, so losses and logit confidences stay finite on interpolated points.
inline constexpr double kProbFloor = 1e-7;

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 250;
  std::size_t batch_size = 64;
  // Datasets with at most this many rows train full-batch.
  std::size_t full_batch_max = 256;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamParams adam() const { return {learning_rate, beta1, beta2, eps}; }

  void validate() const {
    if (!(learning_rate > 0.0)) fail_config("learning_rate must be positive");
    if (epochs < 1) fail_config("epochs must be >= 1");
    if (batch_size < 1) fail_config("batch_size must be >= 1");
  }
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  double first_epoch_loss = std::numeric_limits<double>::quiet_NaN();
  double final_epoch_loss = std::numeric_limits<double>::quiet_NaN();
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

// Binary classifier: ReLU hidden layers of the given widths followed by a
// single sigmoid output. An empty architecture is logistic regression.
class Model {
 public:
  Model() = default;

  Model(std::size_t input_dim, std::vector<std::size_t> architecture)
      : input_dim_(input_dim), architecture_(std::move(architecture)) {
    if (input_dim_ < 1) fail_config("model input dimension must be >= 1");
    Eigen::Index in = static_cast<Eigen::Index>(input_dim_);
    for (std::size_t w : architecture_) {
      if (w < 1) fail_config("layer widths must be positive");
      layers_.emplace_back(in, static_cast<Eigen::Index>(w));
      in = static_cast<Eigen::Index>(w);
    }
    layers_.emplace_back(in, 1);
    for (auto& l : layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& architecture() const { return architecture_; }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  TrainingMeta& meta() { return meta_; }
  const TrainingMeta& meta() const { return meta_; }

  // Pre-sigmoid outputs for a batch (rows are inputs).
  Vector logits(const Matrix& x) const {
    check_dimension(x.cols(), static_cast<Eigen::Index>(input_dim_), "model input");
    Matrix a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) a = layers_[l].forward(a).cwiseMax(0.0);
    return layers_.back().forward(a).col(0);
  }

  double logit(const Vector& x) const {
    check_dimension(x.size(), static_cast<Eigen::Index>(input_dim_), "model input");
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      a = (layers_[l].weight.transpose() * a + layers_[l].bias.transpose()).cwiseMax(0.0);
    }
    return layers_.back().weight.col(0).dot(a) + layers_.back().bias[0];
  }

  // Gradient of the pre-sigmoid output with respect to the input.
  Vector logit_gradient(const Vector& x) const {
    check_dimension(x.size(), static_cast<Eigen::Index>(input_dim_), "model input");
    std::vector<Eigen::VectorXd> masks;
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      Eigen::VectorXd pre = layers_[l].weight.transpose() * a + layers_[l].bias.transpose();
      masks.push_back((pre.array() > 0.0).cast<double>());
      a = pre.cwiseMax(0.0);
    }
    Eigen::VectorXd g = layers_.back().weight.col(0);
    for (std::size_t l = layers_.size() - 1; l-- > 0;) {
      g = layers_[l].weight * g.cwiseProduct(masks[l]);
    }
    return g;
  }

  bool same_parameters(const Model& o) const {
    return input_dim_ == o.input_dim_ && architecture_ == o.architecture_ && layers_ == o.layers_;
  }

 private:
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> architecture_;
  std::vector<Dense> layers_;
  TrainingMeta meta_;
};

inline double predict_proba(const Model& model, const Vector& x) { return sigmoid(model.logit(x)); }

inline Vector predict_proba(const Model& model, const Matrix& x) {
  return model.logits(x).unaryExpr([](double z) { return sigmoid(z); });
}

inline int predict(const Model& model, const Vector& x) {
  return predict_proba(model, x) >= 0.5 ? 1 : 0;
}

namespace detail {

// Clamped probability the model assigns to label y, computed from the logit
// so that the y = 0 branch keeps full precision.
inline double clamped_label_prob(double logit, int y) {
  const double q = sigmoid(y == 1 ? logit : -logit);
  return std::clamp(q, kProbFloor, 1.0 - kProbFloor);
}

}  // namespace detail

inline double bce_loss(const Model& model, const Vector& x, int y) {
  return -std::log(detail::clamped_label_prob(model.logit(x), y));
}

// logit((f(x))_y), the logit-scaled confidence in the given label.
inline double logit_confidence(const Model& model, const Vector& x, int y) {
  const double q = detail::clamped_label_prob(model.logit(x), y);
  return std::log(q) - std::log1p(-q);
}

struct BceToTarget {
  int target = 1;
};

// l(f(x'), 1) + lambda * c(anchor, x').
struct RecourseObjective {
  Vector anchor;
  double lambda = 0.1;
  CostFn cost;
};

using InputObjective = std::variant<BceToTarget, RecourseObjective>;

inline double objective_value(const Model& model, const Vector& x, const InputObjective& obj) {
  if (const auto* b = std::get_if<BceToTarget>(&obj)) {
    const double z = model.logit(x);
    return softplus(b->target == 1 ? -z : z);
  }
  const auto& r = std::get<RecourseObjective>(obj);
  return softplus(-model.logit(x)) + r.lambda * r.cost(r.anchor, x);
}

// Gradient of the selected scalar objective with respect to the input. The
// loss term is differentiated without clamping.
inline Vector input_gradient(const Model& model, const Vector& x, const InputObjective& obj) {
  const double p = predict_proba(model, x);
  if (const auto* b = std::get_if<BceToTarget>(&obj)) {
    return (p - b->target) * model.logit_gradient(x);
  }
  const auto& r = std::get<RecourseObjective>(obj);
  check_dimension(r.anchor.size(), x.size(), "recourse anchor");
  Vector g = (p - 1.0) * model.logit_gradient(x);
  if (r.lambda != 0.0) g += r.lambda * r.cost.gradient(r.anchor, x);
  return g;
}

inline double accuracy(const Model& model, const Dataset& data) {
  if (data.n() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  constexpr Eigen::Index kChunk = 1024;
  const Matrix& x = data.features();
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const Vector z = model.logits(x.middleRows(start, len));
    for (Eigen::Index i = 0; i < len; ++i) {
      const int pred = z[i] >= 0.0 ? 1 : 0;
      correct += pred == data.label(static_cast<std::size_t>(start + i)) ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.n());
}

namespace detail {

inline std::vector<std::size_t> batch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order.begin(), order.end());
  return order;
}

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order, std::size_t from,
                          std::size_t count) {
  Matrix out(static_cast<Eigen::Index>(count), x.cols());
  for (std::size_t k = 0; k < count; ++k) {
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(order[from + k]));
  }
  return out;
}

}  // namespace detail

// Mini-batch Adam on mean binary cross-entropy. Deterministic for a fixed
// config: per-layer seeded initialization, per-epoch seeded shuffling.
inline Model train_classifier(const Dataset& data, const std::vector<std::size_t>& architecture,
                              const TrainConfig& config, const Dataset* test = nullptr) {
  config.validate();
  if (data.n() == 0) fail_config("cannot train on an empty dataset");
  Model model(data.d(), architecture);
  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Rng rng(derive_seed(config.seed, "init", l));
    layers[l].init_uniform(rng);
  }
  std::vector<DenseGrad> grads, m, v;
  for (const auto& l : layers) {
    grads.emplace_back(l);
    m.emplace_back(l);
    v.emplace_back(l);
  }
  Adam adam(config.adam());
  const std::size_t n = data.n();
  const std::size_t batch = n <= config.full_batch_max ? n : std::min(config.batch_size, n);
  const Matrix& features = data.features();
  const Vector labels = data.label_vector();
  const std::size_t nl = layers.size();
  std::vector<Matrix> acts(nl);

  auto& meta = model.meta();
  meta.seed = config.seed;
  meta.epochs = config.epochs;
  meta.learning_rate = config.learning_rate;
  meta.batch_size = batch;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = detail::batch_order(n, config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t from = 0; from < n; from += batch) {
      const std::size_t count = std::min(batch, n - from);
      acts[0] = detail::gather_rows(features, order, from, count);
      Vector y(static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k) {
        y[static_cast<Eigen::Index>(k)] = labels[static_cast<Eigen::Index>(order[from + k])];
      }
      for (std::size_t l = 0; l + 1 < nl; ++l) acts[l + 1] = layers[l].forward(acts[l]).cwiseMax(0.0);
      const Vector z = layers.back().forward(acts[nl - 1]).col(0);

      Matrix dz(static_cast<Eigen::Index>(count), 1);
      const double inv = 1.0 / static_cast<double>(count);
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        loss_sum += softplus(z[k]) - y[k] * z[k];
        dz(k, 0) = (sigmoid(z[k]) - y[k]) * inv;
      }
      Matrix delta = std::move(dz);
      for (std::size_t l = nl; l-- > 0;) {
        grads[l].weight.noalias() = acts[l].transpose() * delta;
        grads[l].bias = delta.colwise().sum();
        if (l > 0) {
          Matrix back = delta * layers[l].weight.transpose();
          delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
      }
      adam.next_step();
      for (std::size_t l = 0; l < nl; ++l) adam.apply(layers[l], grads[l], m[l], v[l]);
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) fail_runtime("training diverged: non-finite loss at epoch ", epoch);
    if (epoch == 1) meta.first_epoch_loss = epoch_loss;
    meta.final_epoch_loss = epoch_loss;
  }
  meta.train_accuracy = accuracy(model, data);
  if (test != nullptr) meta.test_accuracy = accuracy(model, *test);
  return model;
}

}  // namespace cfmia
