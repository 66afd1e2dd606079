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

#include <cmath>

#include <gtest/gtest.h>

#include "cfmia/data.hpp"
#include "cfmia/model_io.hpp"
#include "cfmia/nn.hpp"
#include "cfmia/vae.hpp"
#include "test_util.hpp"

namespace cfmia {
namespace {

using testing::linear_model;
using testing::numeric_gradient;
using testing::random_model;
using testing::random_vector;
using testing::vec;

TEST(PredictTest, LogisticExamples) {
  EXPECT_DOUBLE_EQ(predict_proba(linear_model({0, 0}, 0), vec({3, -7})), 0.5);
  const Model m = linear_model({1, 0}, 0);
  EXPECT_DOUBLE_EQ(predict_proba(m, vec({0, 0})), 0.5);
  EXPECT_NEAR(predict_proba(m, vec({1, 0})), 0.7310585786300049, 1e-15);
  EXPECT_EQ(predict(m, vec({0, 0})), 1);
  EXPECT_EQ(predict(m, vec({-1e-9, 0})), 0);
  EXPECT_THROW(predict_proba(m, vec({1, 0, 0})), ConfigError);
}

TEST(PredictTest, BatchMatchesSingle) {
  const Model m = random_model(4, {7, 5}, 3);
  Rng rng(1);
  Matrix x(10, 4);
  for (int i = 0; i < 10; ++i) x.row(i) = random_vector(4, rng).transpose();
  const Vector p = predict_proba(m, x);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(p[i], predict_proba(m, Vector(x.row(i).transpose())), 1e-14);
}

TEST(LossTest, BceExamples) {
  const Model m = linear_model({1, 0}, 0);
  EXPECT_NEAR(bce_loss(m, vec({0, 0}), 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(m, vec({1, 0}), 0), 1.3132616875182228, 1e-12);
  // Saturated predictions stop at the clamp.
  EXPECT_NEAR(bce_loss(m, vec({100, 0}), 0), -std::log(1e-7), 1e-9);
  EXPECT_NEAR(bce_loss(m, vec({100, 0}), 1), -std::log1p(-1e-7), 1e-15);
  EXPECT_GT(bce_loss(m, vec({100, 0}), 1), 0.0);
}

TEST(LossTest, LogitConfidenceExamples) {
  EXPECT_NEAR(logit_confidence(linear_model({1, 0}, 0), vec({0, 0}), 1), 0.0, 1e-15);
  EXPECT_NEAR(logit_confidence(linear_model({1, 0}, 0), vec({1, 0}), 1), 1.0, 1e-12);
  EXPECT_NEAR(logit_confidence(linear_model({1, 0}, 0), vec({-3, 0}), 1), -3.0, 1e-12);
  EXPECT_NEAR(logit_confidence(linear_model({1, 0}, 0), vec({3, 0}), 0), -3.0, 1e-12);
}

TEST(LossTest, SoftplusIdentityOnClampedValue) {
  const Model m = random_model(3, {6}, 8);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(3, rng, 10.0);
    for (int y : {0, 1}) {
      EXPECT_NEAR(bce_loss(m, x, y), std::log1p(std::exp(-logit_confidence(m, x, y))), 1e-9);
    }
  }
}

TEST(GradientTest, LogisticBceToTargetIsAnalytic) {
  const Model m = linear_model({0.5, -2, 1}, 0.3);
  const Vector x = vec({0.1, 0.2, -0.4});
  const double p = predict_proba(m, x);
  for (int t : {0, 1}) {
    const Vector g = input_gradient(m, x, BceToTarget{t});
    EXPECT_NEAR(g[0], (p - t) * 0.5, 1e-15);
    EXPECT_NEAR(g[1], (p - t) * -2.0, 1e-15);
    EXPECT_NEAR(g[2], (p - t) * 1.0, 1e-15);
  }
}

TEST(GradientTest, ZeroLambdaReducesToBce) {
  const Model m = random_model(5, {8}, 4);
  Rng rng(6);
  const Vector x = random_vector(5, rng);
  const Vector anchor = random_vector(5, rng);
  EXPECT_EQ(input_gradient(m, x, RecourseObjective{anchor, 0.0, {CostNorm::kL1}}),
            input_gradient(m, x, BceToTarget{1}));
}

void expect_matches_finite_differences(const Model& m, const InputObjective& obj, Rng& rng, double scale) {
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_vector(m.input_dim(), rng, scale);
    const Vector g = input_gradient(m, x, obj);
    const Vector fd = numeric_gradient([&](const Vector& p) { return objective_value(m, p, obj); }, x);
    const double tol = std::max(1e-4, 1e-3 * g.norm());
    EXPECT_LE((g - fd).cwiseAbs().maxCoeff(), tol) << "point " << i;
  }
}

TEST(GradientTest, MatchesFiniteDifferences) {
  Rng rng(11);
  const Vector anchor = random_vector(6, rng);
  const std::vector<InputObjective> objectives = {BceToTarget{1}, BceToTarget{0},
                                                  RecourseObjective{anchor, 0.3, {CostNorm::kL2}}};
  for (const auto& arch : std::vector<std::vector<std::size_t>>{{}, {16}, {12, 9}}) {
    const Model m = random_model(6, arch, 21 + arch.size());
    for (const auto& obj : objectives) expect_matches_finite_differences(m, obj, rng, 1.0);
  }
}

TEST(TrainTest, SeparableBlobsLogistic) {
  const Dataset d = generate_synthetic({2, 200, 5, 3.0});
  TrainConfig c;
  c.learning_rate = 0.05;
  c.epochs = 100;
  c.seed = 1;
  const Model m = train_classifier(d, {}, c);
  EXPECT_GE(m.meta().train_accuracy, 0.99);
  EXPECT_LE(m.meta().final_epoch_loss, m.meta().first_epoch_loss);
  EXPECT_EQ(m.meta().batch_size, 64u);
}

TEST(TrainTest, Deterministic) {
  const Dataset d = generate_synthetic({5, 100, 2, 0.5});
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 20;
  c.seed = 77;
  const Model a = train_classifier(d, {10}, c);
  const Model b = train_classifier(d, {10}, c);
  EXPECT_TRUE(a.same_parameters(b));
  c.seed = 78;
  EXPECT_FALSE(a.same_parameters(train_classifier(d, {10}, c)));
}

TEST(TrainTest, MlpSolvesXor) {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const Dataset d(x, {0, 1, 1, 0});
  TrainConfig c;
  c.learning_rate = 0.05;
  c.epochs = 500;
  c.seed = 3;
  const Model m = train_classifier(d, {16}, c);
  EXPECT_DOUBLE_EQ(m.meta().train_accuracy, 1.0);
  EXPECT_EQ(m.meta().batch_size, 4u);
}

TEST(TrainTest, DivergenceReportsEpoch) {
  Matrix x(4, 1);
  const double inf = std::numeric_limits<double>::infinity();
  x << inf, -inf, inf, -inf;
  const Dataset d(x, {1, 0, 1, 0});
  TrainConfig c;
  c.epochs = 3;
  try {
    train_classifier(d, {}, c);
    FAIL();
  } catch (const RuntimeError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, RejectsBadConfig) {
  const Dataset d = generate_synthetic({2, 5, 1, 1.0});
  TrainConfig c;
  c.learning_rate = -1;
  EXPECT_THROW(train_classifier(d, {}, c), ConfigError);
  EXPECT_THROW(train_classifier(d, {0}, TrainConfig{}), ConfigError);
}

TEST(VaeTest, Shapes) {
  const VaeModel v(10);
  const auto [mean, logvar] = v.encode(Vector(Vector::Zero(10)));
  EXPECT_EQ(mean.size(), 8);
  EXPECT_EQ(logvar.size(), 8);
  EXPECT_EQ(v.decode(Vector(Vector::Zero(8))).size(), 10);
  EXPECT_EQ(v.shape().hidden, 20u);
}

TEST(VaeTest, TrainingImprovesAndBeatsConstantDecoder) {
  auto [d, scaler] = standardize(generate_synthetic({10, 300, 4, 1.0}));
  TrainConfig c = default_vae_config();
  c.learning_rate = 0.005;
  c.epochs = 60;
  c.seed = 5;
  const VaeModel v = train_vae(d, c);
  EXPECT_LT(v.meta().final_epoch_loss, v.meta().first_epoch_loss);
  const Vector zero_decoded = v.decode(Vector(Vector::Zero(8)));
  const Matrix& x = d.features();
  const double baseline = (x.rowwise() - zero_decoded.transpose()).squaredNorm() / static_cast<double>(x.size());
  EXPECT_LE(reconstruction_mse(v, x), baseline);

  const VaeModel again = train_vae(d, c);
  EXPECT_TRUE(v.same_parameters(again));
}

TEST(ModelIoTest, ClassifierRoundTripIsBitExact) {
  const auto dir = testing::scratch_dir("model_io");
  const Dataset d = generate_synthetic({3, 40, 2, 1.0});
  TrainConfig c;
  c.epochs = 3;
  c.seed = 4;
  const Model m = train_classifier(d, {5, 4}, c, &d);
  save_model(m, (dir / "m").string());
  const Model r = load_model((dir / "m").string());
  EXPECT_TRUE(m.same_parameters(r));
  EXPECT_EQ(r.meta().seed, 4u);
  EXPECT_EQ(r.meta().final_epoch_loss, m.meta().final_epoch_loss);
  EXPECT_EQ(r.meta().test_accuracy, m.meta().test_accuracy);
}

TEST(ModelIoTest, VaeRoundTripAndNanMeta) {
  const auto dir = testing::scratch_dir("vae_io");
  VaeModel v(6, {7, 3});
  Rng rng(1);
  for (auto& l : v.layers()) l.init_uniform(rng);
  save_vae(v, (dir / "v").string());
  const VaeModel r = load_vae((dir / "v").string());
  EXPECT_TRUE(v.same_parameters(r));
  EXPECT_EQ(r.shape().latent, 3u);
  EXPECT_TRUE(std::isnan(r.meta().test_accuracy));
}

TEST(ModelIoTest, RejectsWrongKindAndCorruptBlob) {
  const auto dir = testing::scratch_dir("io_errors");
  save_model(linear_model({1, 2}, 3), (dir / "m").string());
  EXPECT_THROW(load_vae((dir / "m").string()), RuntimeError);
  std::ofstream((dir / "m.bin").string(), std::ios::binary) << "garbage";
  EXPECT_THROW(load_model((dir / "m").string()), RuntimeError);
  EXPECT_THROW(load_model((dir / "absent").string()), RuntimeError);
}

}  // namespace
}  // namespace cfmia
