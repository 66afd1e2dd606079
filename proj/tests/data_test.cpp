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

#include <algorithm>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "cfmia/data.hpp"
#include "test_util.hpp"

namespace cfmia {
namespace {

using testing::scratch_dir;

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(SyntheticTest, ShapeAndBalance) {
  const Dataset d = generate_synthetic({3, 5, 7, 1.0});
  EXPECT_EQ(d.n(), 10u);
  EXPECT_EQ(d.d(), 3u);
  EXPECT_EQ(std::count(d.labels().begin(), d.labels().end(), 0), 5);
  EXPECT_EQ(std::count(d.labels().begin(), d.labels().end(), 1), 5);
}

TEST(SyntheticTest, Deterministic) {
  const Dataset a = generate_synthetic({4, 50, 11, 1.0});
  const Dataset b = generate_synthetic({4, 50, 11, 1.0});
  EXPECT_EQ(a.features(), b.features());
  EXPECT_EQ(a.labels(), b.labels());
  const Dataset c = generate_synthetic({4, 50, 12, 1.0});
  EXPECT_NE(a.features(), c.features());
}

TEST(SyntheticTest, ClassMeansConvergeToVertices) {
  for (double sep : {1.0, 0.3}) {
    const Dataset d = generate_synthetic({2, 50000, 1, sep});
    const Matrix& centers = d.provenance().class_centers;
    ASSERT_EQ(centers.rows(), 2);
    EXPECT_NE(centers.row(0), centers.row(1));
    for (int k = 0; k < 2; ++k) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
      for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.label(i) == k) mean += d.features().row(static_cast<Eigen::Index>(i));
      }
      mean /= 50000.0;
      for (int j = 0; j < 2; ++j) {
        EXPECT_DOUBLE_EQ(std::fabs(centers(k, j)), sep);
        EXPECT_NEAR(mean[j], centers(k, j), 0.02);
      }
    }
  }
}

TEST(SyntheticTest, CentersAreScaledHypercubeVerticesInHighDimension) {
  const Dataset d = generate_synthetic({40, 400, 3, 0.5});
  const double tol = 4.0 / std::sqrt(400.0);
  for (int k = 0; k < 2; ++k) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(40);
    for (std::size_t i = 0; i < d.n(); ++i) {
      if (d.label(i) == k) mean += d.features().row(static_cast<Eigen::Index>(i));
    }
    mean /= 400.0;
    EXPECT_LE((mean - d.provenance().class_centers.row(k)).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(LoadTabularTest, MedianThreshold) {
  const auto dir = scratch_dir("median");
  write(dir / "a.csv", "f1,score\n1.5,1\n2.5,2\n3.5,3\n4.5,4\n");
  const Dataset d = load_tabular((dir / "a.csv").string(), "score", LabelRule::kMedianThreshold);
  EXPECT_EQ(d.labels(), (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(d.d(), 1u);
  EXPECT_DOUBLE_EQ(d.features()(2, 0), 3.5);
}

TEST(LoadTabularTest, MedianTiesGoToZero) {
  const auto dir = scratch_dir("ties");
  write(dir / "a.csv", "score,f\n1,0\n2,0\n2,0\n3,0\n2,0\n");
  const Dataset d = load_tabular((dir / "a.csv").string(), "score", LabelRule::kMedianThreshold);
  EXPECT_EQ(d.labels(), (std::vector<int>{0, 0, 0, 1, 0}));
}

TEST(LoadTabularTest, BinaryPassThroughAndColumnOrder) {
  const auto dir = scratch_dir("binary");
  write(dir / "a.csv", "a,label,b\n1,0,2\n3,1,4\n");
  const Dataset d = load_tabular((dir / "a.csv").string(), "label", LabelRule::kBinary);
  EXPECT_EQ(d.labels(), (std::vector<int>{0, 1}));
  EXPECT_EQ(d.d(), 2u);
  EXPECT_DOUBLE_EQ(d.features()(1, 1), 4.0);
  EXPECT_EQ(d.provenance().feature_names, (std::vector<std::string>{"a", "b"}));
}

TEST(LoadTabularTest, ErrorsNameLocation) {
  const auto dir = scratch_dir("bad");
  write(dir / "text.csv", "a,label\n1,0\nabc,1\n");
  try {
    load_tabular((dir / "text.csv").string(), "label", LabelRule::kBinary);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
  }
  write(dir / "nolabel.csv", "a,b\n1,2\n");
  EXPECT_THROW(load_tabular((dir / "nolabel.csv").string(), "label", LabelRule::kBinary), ConfigError);
  write(dir / "notbinary.csv", "a,label\n1,2\n");
  EXPECT_THROW(load_tabular((dir / "notbinary.csv").string(), "label", LabelRule::kBinary), ConfigError);
  write(dir / "ragged.csv", "a,label\n1,0,5\n");
  EXPECT_THROW(load_tabular((dir / "ragged.csv").string(), "label", LabelRule::kBinary), ConfigError);
  EXPECT_THROW(load_tabular((dir / "missing.csv").string(), "label", LabelRule::kBinary), ConfigError);
}

TEST(StandardizeTest, PopulationConvention) {
  Matrix x(2, 1);
  x << 1, 3;
  auto [z, p] = standardize(Dataset(x, {0, 1}));
  EXPECT_DOUBLE_EQ(z.features()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z.features()(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(p.std[0], 1.0);
  EXPECT_TRUE(p.population_std);
  EXPECT_TRUE(z.provenance().standardized);
}

TEST(StandardizeTest, MomentsIdempotenceAndInverse) {
  const Dataset d = generate_synthetic({6, 200, 4, 2.0});
  auto [z, p] = standardize(d);
  const Matrix& f = z.features();
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double mean = f.col(j).mean();
    const double var = (f.col(j).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
  auto [z2, p2] = standardize(z);
  EXPECT_LE((z2.features() - f).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((p.inverse_transform(f) - d.features()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StandardizeTest, ZeroVarianceNamesColumn) {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  Provenance prov;
  prov.feature_names = {"age", "const"};
  try {
    standardize(Dataset(x, {0, 1, 0}, prov));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("const"), std::string::npos) << e.what();
  }
}

TEST(SplitTest, DisjointSizesAndDeterminism) {
  const Dataset d = generate_synthetic({2, 50, 1, 1.0});
  const SplitBundle a = split(d, 50, 30, 20, 9);
  EXPECT_EQ(a.owner_train.n(), 50u);
  EXPECT_EQ(a.shadow_pool.n(), 30u);
  EXPECT_EQ(a.eval_out.n(), 20u);
  std::set<std::size_t> all;
  for (const auto* rows : {&a.owner_rows, &a.shadow_rows, &a.eval_out_rows}) all.insert(rows->begin(), rows->end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(a.eval_in.size(), 50u);
  EXPECT_EQ(*std::max_element(a.eval_in.begin(), a.eval_in.end()), 49u);
  for (std::size_t k = 0; k < a.owner_rows.size(); ++k) {
    EXPECT_EQ(a.owner_train.row(k), d.row(a.owner_rows[k]));
  }

  const SplitBundle b = split(d, 50, 30, 20, 9);
  EXPECT_EQ(a.owner_rows, b.owner_rows);
  EXPECT_EQ(a.shadow_rows, b.shadow_rows);
  EXPECT_EQ(a.eval_out_rows, b.eval_out_rows);
  EXPECT_NE(a.owner_rows, split(d, 50, 30, 20, 10).owner_rows);
}

TEST(SplitTest, OversizedIsError) {
  const Dataset d = generate_synthetic({2, 50, 1, 1.0});
  EXPECT_THROW(split(d, 90, 20, 0, 1), ConfigError);
}

TEST(DatasetTest, CsvRoundTrip) {
  const auto dir = scratch_dir("csv");
  const Dataset d = generate_synthetic({3, 20, 2, 1.0});
  write_csv(d, (dir / "d.csv").string());
  const Dataset r = load_tabular((dir / "d.csv").string(), "label", LabelRule::kBinary);
  EXPECT_EQ(r.labels(), d.labels());
  EXPECT_EQ(r.features(), d.features());
}

TEST(DatasetTest, RejectsBadLabels) {
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), {0, 2}), ConfigError);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), {0}), ConfigError);
}

}  // namespace
}  // namespace cfmia
