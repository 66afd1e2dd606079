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

#include <cmath>

#include "cfmia/common.hpp"
#include "cfmia/rng.hpp"

namespace cfmia {

// Fully connected layer computing x * weight + bias on row-major batches.
struct Dense {
  Eigen::MatrixXd weight;  // in x out
  Eigen::RowVectorXd bias;

  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out) : weight(in, out), bias(out) {}

  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }

  Matrix forward(const Matrix& x) const {
    Matrix y = x * weight;
    y.rowwise() += bias;
    return y;
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, the
  // fan-in Kaiming variant used by common deep-learning frameworks.
  void init_uniform(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in()));
    for (Eigen::Index c = 0; c < weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < weight.rows(); ++r) weight(r, c) = rng.uniform(-bound, bound);
    }
    for (Eigen::Index c = 0; c < bias.size(); ++c) bias[c] = rng.uniform(-bound, bound);
  }

  bool operator==(const Dense& o) const { return weight == o.weight && bias == o.bias; }
};

struct DenseGrad {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;

  explicit DenseGrad(const Dense& shape)
      : weight(Eigen::MatrixXd::Zero(shape.in(), shape.out())),
        bias(Eigen::RowVectorXd::Zero(shape.out())) {}
};

struct AdamParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction, eps added after the bias-corrected square root.
class Adam {
 public:
  explicit Adam(AdamParams p) : p_(p) {}

  void next_step() {
    ++t_;
    bc1_ = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    bc2_sqrt_ = std::sqrt(1.0 - std::pow(p_.beta2, static_cast<double>(t_)));
  }

  template <typename Param, typename Grad, typename State>
  void apply(Param& param, const Grad& grad, State& m, State& v) const {
    m = p_.beta1 * m + (1.0 - p_.beta1) * grad;
    v = p_.beta2 * v + (1.0 - p_.beta2) * grad.cwiseAbs2();
    const double step = p_.learning_rate / bc1_;
    param.array() -= step * m.array() / (v.array().sqrt() / bc2_sqrt_ + p_.eps);
  }

  void apply(Dense& layer, const DenseGrad& g, DenseGrad& m, DenseGrad& v) const {
    apply(layer.weight, g.weight, m.weight, v.weight);
    apply(layer.bias, g.bias, m.bias, v.bias);
  }

  long step_count() const { return t_; }

 private:
  AdamParams p_;
  long t_ = 0;
  double bc1_ = 1.0;
  double bc2_sqrt_ = 1.0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

}  // namespace cfmia
