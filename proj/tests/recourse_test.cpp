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

#include "cfmia/recourse.hpp"
#include "test_util.hpp"

namespace cfmia {
namespace {

using testing::linear_model;
using testing::random_vector;
using testing::vec;

const CostFn kL1{CostNorm::kL1};
const CostFn kL2{CostNorm::kL2};

TEST(CostTest, Examples) {
  EXPECT_EQ(cost(vec({1, 2}), vec({1, 2}), kL1), 0.0);
  EXPECT_EQ(cost(vec({0, 0}), vec({1, 1}), kL1), 2.0);
  EXPECT_DOUBLE_EQ(cost(vec({0, 0}), vec({1, 1}), kL2), std::sqrt(2.0));
  EXPECT_THROW(cost(vec({0, 0}), vec({1}), kL1), ConfigError);
  EXPECT_EQ(CostFn{}.norm, CostNorm::kL1);
}

TEST(CostTest, NormPropertiesOnRandomPairs) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const std::size_t d = 1 + rng.below(20);
    const Vector a = random_vector(d, rng), b = random_vector(d, rng), c = random_vector(d, rng);
    const double l1 = cost(a, b, kL1), l2 = cost(a, b, kL2);
    EXPECT_LE(l2, l1 * (1 + 1e-15));
    EXPECT_LE(l1, std::sqrt(static_cast<double>(d)) * l2 * (1 + 1e-12));
    for (const CostFn& f : {kL1, kL2}) {
      EXPECT_EQ(cost(a, b, f), cost(b, a, f));
      EXPECT_LE(cost(a, c, f), cost(a, b, f) + cost(b, c, f) + 1e-12);
    }
  }
}

TEST(CostTest, SubgradientZeroAtZero) {
  const Vector g = kL1.gradient(vec({1, 2, 3}), vec({1, 5, 0}));
  EXPECT_EQ(g, vec({0, 1, -1}));
  EXPECT_EQ(kL2.gradient(vec({1, 1}), vec({1, 1})), vec({0, 0}));
}

TEST(L1BallTest, PointsInsideBall) {
  Rng rng(2);
  for (std::size_t d : {1u, 2u, 7u, 50u}) {
    const Vector c = random_vector(d, rng, 100.0);
    const Matrix pts = uniform_l1_ball_sample(c, 0.37, 2000, 5);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      ASSERT_LE((Vector(pts.row(i).transpose()) - c).lpNorm<1>(), 0.37);
    }
  }
  EXPECT_EQ(uniform_l1_ball_sample(vec({0}), 1.0, 10, 9), uniform_l1_ball_sample(vec({0}), 1.0, 10, 9));
  EXPECT_THROW(uniform_l1_ball_sample(vec({0}), 0.0, 10, 9), ConfigError);
}

TEST(L1BallTest, OneDimensionalIsUniformInterval) {
  const Matrix pts = uniform_l1_ball_sample(vec({3.0}), 2.0, 100000, 11);
  const double mean_abs = (pts.array() - 3.0).abs().mean();
  EXPECT_NEAR(mean_abs, 1.0, 0.01);
}

TEST(L1BallTest, TwoDimensionalVolumeScaling) {
  const Matrix pts = uniform_l1_ball_sample(vec({0, 0}), 1.0, 100000, 12);
  const double inner = (pts.rowwise().lpNorm<1>().array() <= 0.5).cast<double>().mean();
  EXPECT_NEAR(inner, 0.25, 0.25 * 0.02);
  // Quadrants are equally likely.
  const double q1 = ((pts.col(0).array() > 0) && (pts.col(1).array() > 0)).cast<double>().mean();
  EXPECT_NEAR(q1, 0.25, 0.006);
}

// Cheapest valid point on a grid around the origin, the brute-force optimum.
double grid_min_valid_cost(const Model& m, const Vector& x, const CostFn& f, double half_width, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double a = -half_width; a <= half_width; a += step) {
    for (double b = -half_width; b <= half_width; b += step) {
      const Vector p = x + vec({a, b});
      if (predict_proba(m, p) >= 0.5) best = std::min(best, f(x, p));
    }
  }
  return best;
}

TEST(ScfeTest, HalfPlaneExample) {
  const Model m = linear_model({1, 0}, -2);
  const RecourseResult r = scfe(m, vec({0, 0}), ScfeParams{}, kL2);
  ASSERT_TRUE(r.valid);
  EXPECT_GE(r.counterfactual[0], 2.0);
  EXPECT_NEAR(r.counterfactual[0], 2.0, 0.05);
  EXPECT_NEAR(r.counterfactual[1], 0.0, 0.05);
  EXPECT_NEAR(r.cost, 2.0, 0.05);
  EXPECT_GE(predict_proba(m, r.counterfactual), 0.5);
  const double oracle = grid_min_valid_cost(m, vec({0, 0}), kL2, 4.0, 0.01);
  EXPECT_LE(r.cost, oracle * 1.05);
  EXPECT_EQ(r.cost, cost(vec({0, 0}), r.counterfactual, kL2));
}

TEST(ScfeTest, RandomLogisticProblemsNearGridOptimum) {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vector w = random_vector(2, rng);
    const Model m = linear_model({w[0], w[1]}, -1.0 - rng.uniform());
    const Vector x = random_vector(2, rng, 0.3);
    if (predict_proba(m, x) >= 0.5) continue;
    const RecourseResult r = scfe(m, x, ScfeParams{}, kL2);
    ASSERT_TRUE(r.valid);
    const double analytic = -m.logit(x) / w.norm();
    EXPECT_GE(r.cost, analytic * (1 - 1e-9));
    EXPECT_LE(r.cost, analytic * 1.05);
  }
}

TEST(ScfeTest, RejectsPositiveInput) {
  EXPECT_THROW(scfe(linear_model({1, 0}, 0), vec({1, 0}), ScfeParams{}, kL1), ConfigError);
}

TEST(ScfeTest, DeterministicAndValidWithTinyLambda) {
  const Model m = testing::random_model(4, {8}, 17);
  Rng rng(4);
  ScfeParams p;
  p.lambda = 1e-6;
  int tested = 0;
  for (int i = 0; i < 30 && tested < 5; ++i) {
    const Vector x = random_vector(4, rng);
    if (predict_proba(m, x) >= 0.5) continue;
    ++tested;
    const RecourseResult a = scfe(m, x, p, kL1, 9);
    const RecourseResult b = scfe(m, x, p, kL1, 9);
    EXPECT_EQ(a.counterfactual, b.counterfactual);
    EXPECT_EQ(a.cost, b.cost);
    if (a.valid) {
      EXPECT_GE(predict_proba(m, a.counterfactual), 0.5);
    }
  }
  EXPECT_GT(tested, 0);
}

TEST(ScfeTest, ImmutableFeaturesCanForceFailure) {
  const Model m = linear_model({1, 0}, -2);
  ScfeParams p;
  p.immutable = {0};
  p.max_iters = 50;
  p.max_retries = 2;
  const RecourseResult r = scfe(m, vec({0, 0}), p, kL1);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.trace.retries, 2);
  EXPECT_DOUBLE_EQ(r.trace.lambda, 0.1 * 0.25);
  EXPECT_EQ(r.counterfactual[0], 0.0);
}

TEST(ScfeTest, RetriesShrinkLambda) {
  // A huge lambda keeps x' pinned near x; decaying it eventually lets the loss win.
  const Model m = linear_model({1, 0}, -2);
  ScfeParams p;
  p.lambda = 50;
  p.lambda_decay = 0.1;
  p.max_iters = 300;
  const RecourseResult r = scfe(m, vec({0, 0}), p, kL1);
  ASSERT_TRUE(r.valid);
  EXPECT_GT(r.trace.retries, 0);
  EXPECT_LT(r.trace.lambda, 50.0);
}

TEST(GrowingSpheresTest, HalfspaceBoundaryBand) {
  const Model m = linear_model({1, 0}, -1);  // positive iff x1 >= 1
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SearchParams p;
    p.seed = seed;
    const RecourseResult r = growing_spheres(m, vec({0, 0}), p, kL1);
    ASSERT_TRUE(r.valid);
    EXPECT_GE(r.cost, 1.0);
    EXPECT_LE(r.cost, r.trace.radius);
    EXPECT_LE(r.cost, 1.5);
    EXPECT_GE(predict_proba(m, r.counterfactual), 0.5);
  }
}

TEST(GrowingSpheresTest, ImmediateSuccessAndExhaustion) {
  SearchParams p;
  const RecourseResult near = growing_spheres(linear_model({1, 0}, -1e-12), vec({0, 0}), p, kL1);
  ASSERT_TRUE(near.valid);
  EXPECT_EQ(near.trace.iterations, 1);
  EXPECT_DOUBLE_EQ(near.trace.radius, p.initial_radius);

  p.max_radius = 0.5;
  const RecourseResult far = growing_spheres(linear_model({1, 0}, -5), vec({0, 0}), p, kL1);
  EXPECT_FALSE(far.valid);
  EXPECT_EQ(far.counterfactual, vec({0, 0}));
  EXPECT_EQ(far.trace.iterations, 5);
}

TEST(GrowingSpheresTest, DeterministicPerSeed) {
  const Model m = linear_model({1, 1, 1}, -2);
  SearchParams p;
  p.seed = 5;
  const auto a = growing_spheres(m, vec({0, 0, 0}), p, kL2);
  const auto b = growing_spheres(m, vec({0, 0, 0}), p, kL2);
  EXPECT_EQ(a.counterfactual, b.counterfactual);
  p.seed = 6;
  EXPECT_NE(a.counterfactual, growing_spheres(m, vec({0, 0, 0}), p, kL2).counterfactual);
}

class CchvaeTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto [d, s] = standardize(generate_synthetic({8, 300, 1, 1.0}));
    data_ = new Dataset(d);
    TrainConfig c = default_vae_config();
    c.learning_rate = 0.005;
    c.epochs = 80;
    c.seed = 2;
    vae_ = new VaeModel(train_vae(*data_, c));
    TrainConfig mc;
    mc.learning_rate = 0.01;
    mc.epochs = 30;
    mc.seed = 3;
    model_ = new Model(train_classifier(*data_, {}, mc));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete vae_;
    delete model_;
  }
  static Dataset* data_;
  static VaeModel* vae_;
  static Model* model_;
};

Dataset* CchvaeTest::data_ = nullptr;
VaeModel* CchvaeTest::vae_ = nullptr;
Model* CchvaeTest::model_ = nullptr;

TEST_F(CchvaeTest, CounterfactualDecodesFromRecordedLatent) {
  int found = 0;
  double cchvae_total = 0.0, gs_total = 0.0;
  for (std::size_t i = 0; i < data_->n() && found < 20; ++i) {
    const Vector x = data_->row(i);
    if (predict_proba(*model_, x) >= 0.5) continue;
    SearchParams p;
    p.seed = i;
    const RecourseResult r = cchvae(*model_, *vae_, x, p, kL1);
    if (!r.valid) continue;
    ++found;
    ASSERT_TRUE(r.trace.latent.has_value());
    EXPECT_EQ(r.counterfactual, vae_->decode(*r.trace.latent));
    EXPECT_GE(predict_proba(*model_, r.counterfactual), 0.5);
    EXPECT_EQ(r.cost, cost(x, r.counterfactual, kL1));
    const RecourseResult again = cchvae(*model_, *vae_, x, p, kL1);
    EXPECT_EQ(again.counterfactual, r.counterfactual);
    cchvae_total += r.cost;
    gs_total += growing_spheres(*model_, x, p, kL1).cost;
  }
  EXPECT_GT(found, 10);
  std::printf("mean cost: cchvae %.4f, growing spheres %.4f\n", cchvae_total / found, gs_total / found);
}

TEST_F(CchvaeTest, ExhaustedRadiusIsInvalid) {
  SearchParams p;
  p.max_radius = 0.1;
  p.samples_per_radius = 5;
  // An unreachable target: positive only far outside the data range.
  const Model far = linear_model(std::vector<double>(8, 1.0), -1e6);
  const RecourseResult r = cchvae(far, *vae_, data_->row(0), p, kL1);
  EXPECT_FALSE(r.valid);
  EXPECT_FALSE(r.trace.latent.has_value());
}

TEST(GenerateRecourseTest, DispatchAndJsonRoundTrip) {
  const Model m = linear_model({1, 0}, -1);
  RecourseConfig c;
  c.algorithm = RecourseAlgorithm::kGrowingSpheres;
  const RecourseResult r = generate_recourse(m, nullptr, vec({0, 0}), c, 42);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(r.algorithm, RecourseAlgorithm::kGrowingSpheres);
  const RecourseResult back = recourse_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.counterfactual, r.counterfactual);
  EXPECT_EQ(back.cost, r.cost);
  EXPECT_EQ(back.trace.radius, r.trace.radius);
  c.algorithm = RecourseAlgorithm::kCchvae;
  EXPECT_THROW(generate_recourse(m, nullptr, vec({0, 0}), c, 1), ConfigError);
  EXPECT_EQ(parse_recourse_algorithm("gs"), RecourseAlgorithm::kGrowingSpheres);
  EXPECT_THROW(parse_recourse_algorithm("dice"), ConfigError);
}

}  // namespace
}  // namespace cfmia
