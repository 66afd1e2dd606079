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
#include <utility>
#include <vector>

#include "cfmia/common.hpp"
#include "cfmia/data.hpp"
#include "cfmia/layers.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/rng.hpp"

namespace cfmia {

struct VaeShape {
  std::size_t hidden = 20;
  std::size_t latent = 8;
};

inline TrainConfig default_vae_config() {
  TrainConfig c;
  c.epochs = 200;
  return c;
}

// Gaussian VAE for tabular data:
//   encoder d -> hidden (ReLU) -> {mean, log-variance} heads of width latent
//   decoder latent -> hidden (ReLU) -> d (linear)
class VaeModel {
 public:
  VaeModel() = default;

  VaeModel(std::size_t input_dim, VaeShape shape = {}) : input_dim_(input_dim), shape_(shape) {
    if (input_dim < 1 || shape.hidden < 1 || shape.latent < 1) {
      fail_config("VAE dimensions must be positive");
    }
    const auto d = static_cast<Eigen::Index>(input_dim);
    const auto h = static_cast<Eigen::Index>(shape.hidden);
    const auto k = static_cast<Eigen::Index>(shape.latent);
    layers_ = {Dense(d, h), Dense(h, k), Dense(h, k), Dense(k, h), Dense(h, d)};
    for (auto& l : layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  enum Part { kEncHidden = 0, kEncMean = 1, kEncLogVar = 2, kDecHidden = 3, kDecOut = 4 };

  std::size_t input_dim() const { return input_dim_; }
  std::size_t latent_dim() const { return shape_.latent; }
  const VaeShape& shape() const { return shape_; }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  TrainingMeta& meta() { return meta_; }
  const TrainingMeta& meta() const { return meta_; }

  std::pair<Matrix, Matrix> encode(const Matrix& x) const {
    check_dimension(x.cols(), static_cast<Eigen::Index>(input_dim_), "VAE encoder input");
    const Matrix h = layers_[kEncHidden].forward(x).cwiseMax(0.0);
    return {layers_[kEncMean].forward(h), layers_[kEncLogVar].forward(h)};
  }

  // Returns (mean, log-variance) of the approximate posterior.
  std::pair<Vector, Vector> encode(const Vector& x) const {
    auto [mu, lv] = encode(Matrix(x.transpose()));
    return {mu.row(0).transpose(), lv.row(0).transpose()};
  }

  Matrix decode(const Matrix& z) const {
    check_dimension(z.cols(), static_cast<Eigen::Index>(shape_.latent), "VAE decoder input");
    return layers_[kDecOut].forward(layers_[kDecHidden].forward(z).cwiseMax(0.0));
  }

  Vector decode(const Vector& z) const { return decode(Matrix(z.transpose())).row(0).transpose(); }

  bool same_parameters(const VaeModel& o) const {
    return input_dim_ == o.input_dim_ && shape_.hidden == o.shape_.hidden &&
           shape_.latent == o.shape_.latent && layers_ == o.layers_;
  }

 private:
  std::size_t input_dim_ = 0;
  VaeShape shape_;
  std::vector<Dense> layers_;
  TrainingMeta meta_;
};

// Minimizes the negative ELBO: 0.5 * ||x - decode(z)||^2 (unit observation
// variance) plus KL(q(z|x) || N(0, I)), averaged over the batch, with the
// reparameterization z = mean + exp(logvar / 2) * eps.
inline VaeModel train_vae(const Dataset& data, const TrainConfig& config, VaeShape shape = {}) {
  config.validate();
  if (data.n() == 0) fail_config("cannot train a VAE on an empty dataset");
  VaeModel vae(data.d(), shape);
  auto& L = vae.layers();
  for (std::size_t l = 0; l < L.size(); ++l) {
    Rng rng(derive_seed(config.seed, "vae-init", l));
    L[l].init_uniform(rng);
  }
  std::vector<DenseGrad> g, m, v;
  for (const auto& l : L) {
    g.emplace_back(l);
    m.emplace_back(l);
    v.emplace_back(l);
  }
  Adam adam(config.adam());
  const std::size_t n = data.n();
  const std::size_t batch = n <= config.full_batch_max ? n : std::min(config.batch_size, n);
  const auto k = static_cast<Eigen::Index>(shape.latent);
  auto& meta = vae.meta();
  meta.seed = config.seed;
  meta.epochs = config.epochs;
  meta.learning_rate = config.learning_rate;
  meta.batch_size = batch;

  using V = VaeModel;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = detail::batch_order(n, config.seed, epoch);
    Rng noise(derive_seed(config.seed, "vae-noise", static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    for (std::size_t from = 0; from < n; from += batch) {
      const std::size_t count = std::min(batch, n - from);
      const double inv = 1.0 / static_cast<double>(count);
      const Matrix x = detail::gather_rows(data.features(), order, from, count);
      const Matrix h1 = L[V::kEncHidden].forward(x).cwiseMax(0.0);
      const Matrix mu = L[V::kEncMean].forward(h1);
      const Matrix lv = L[V::kEncLogVar].forward(h1);
      Matrix eps(static_cast<Eigen::Index>(count), k);
      for (Eigen::Index i = 0; i < eps.rows(); ++i) {
        for (Eigen::Index j = 0; j < k; ++j) eps(i, j) = noise.normal();
      }
      const Matrix sd = (0.5 * lv.array()).exp().matrix();
      const Matrix z = mu + sd.cwiseProduct(eps);
      const Matrix h2 = L[V::kDecHidden].forward(z).cwiseMax(0.0);
      const Matrix xh = L[V::kDecOut].forward(h2);

      const Matrix diff = xh - x;
      loss_sum += 0.5 * diff.squaredNorm() +
                  0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();

      const Matrix dxh = diff * inv;
      g[V::kDecOut].weight.noalias() = h2.transpose() * dxh;
      g[V::kDecOut].bias = dxh.colwise().sum();
      const Matrix dpre2 = (dxh * L[V::kDecOut].weight.transpose())
                               .cwiseProduct((h2.array() > 0.0).cast<double>().matrix());
      g[V::kDecHidden].weight.noalias() = z.transpose() * dpre2;
      g[V::kDecHidden].bias = dpre2.colwise().sum();
      const Matrix dz = dpre2 * L[V::kDecHidden].weight.transpose();
      const Matrix dmu = dz + mu * inv;
      const Matrix dlv = (0.5 * dz.array() * eps.array() * sd.array() +
                          0.5 * inv * (lv.array().exp() - 1.0))
                             .matrix();
      g[V::kEncMean].weight.noalias() = h1.transpose() * dmu;
      g[V::kEncMean].bias = dmu.colwise().sum();
      g[V::kEncLogVar].weight.noalias() = h1.transpose() * dlv;
      g[V::kEncLogVar].bias = dlv.colwise().sum();
      const Matrix dh1 = dmu * L[V::kEncMean].weight.transpose() +
                         dlv * L[V::kEncLogVar].weight.transpose();
      const Matrix dpre1 = dh1.cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
      g[V::kEncHidden].weight.noalias() = x.transpose() * dpre1;
      g[V::kEncHidden].bias = dpre1.colwise().sum();

      adam.next_step();
      for (std::size_t l = 0; l < L.size(); ++l) adam.apply(L[l], g[l], m[l], v[l]);
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      fail_runtime("VAE training diverged: non-finite loss at epoch ", epoch);
    }
    if (epoch == 1) meta.first_epoch_loss = epoch_loss;
    meta.final_epoch_loss = epoch_loss;
  }
  return vae;
}

// Mean squared reconstruction error through the encoder mean.
inline double reconstruction_mse(const VaeModel& vae, const Matrix& x) {
  const Matrix xh = vae.decode(vae.encode(x).first);
  return (xh - x).squaredNorm() / static_cast<double>(x.size());
}

}  // namespace cfmia
