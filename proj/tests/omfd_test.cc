// Copyright 2026 The AutoEval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "autoeval/omfd.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "autoeval/random.h"
#include "test_util.h"

namespace autoeval {
namespace {

Eigen::MatrixXd HandTraceRows() {
  Eigen::MatrixXd p(3, 3);
  p << 80, 70, 60, 81, 69, 61, 95, 95, 95;
  return p;
}

const std::vector<std::string> kThree = {"m1", "m2", "m3"};

std::vector<std::string> Names(int m) {
  std::vector<std::string> out;
  for (int i = 0; i < m; ++i) out.push_back("method" + std::to_string(i));
  return out;
}

TEST(CentroidTest, CoordinateWiseMedian) {
  EXPECT_EQ(Centroid(HandTraceRows()), Eigen::Vector3d(81, 70, 61));
  Eigen::MatrixXd one(1, 2);
  one << 4, 5;
  EXPECT_EQ(Centroid(one), Eigen::Vector2d(4, 5));
  Eigen::MatrixXd two(2, 2);
  two << 4, 5, 6, 9;
  EXPECT_EQ(Centroid(two), Eigen::Vector2d(5, 7));
  EXPECT_ANY_THROW(Centroid(Eigen::MatrixXd(0, 2)));
}

TEST(OmfdTest, HandTracedExample) {
  const EnsembleReport r = OmfdFuse(HandTraceRows(), kThree, {10.0, std::nullopt});
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].method, "m3");
  // Deviations from (81, 70, 61) are (14, 25, 34).
  const double expected = std::sqrt((14.0 * 14 + 25 * 25 + 34 * 34) / 3.0);
  EXPECT_NEAR(r.removed[0].distance, expected, 1e-12);
  EXPECT_NEAR(r.removed[0].distance, 25.67, 0.01);
  EXPECT_TRUE(r.fused.isApprox(Eigen::Vector3d(80.5, 69.5, 60.5), 1e-15));
  EXPECT_EQ(r.Survivors(), (std::vector<std::string>{"m1", "m2"}));
  EXPECT_TRUE(r.centroid.isApprox(Eigen::Vector3d(80.5, 69.5, 60.5), 1e-15));
  EXPECT_FALSE(r.degenerate);
}

TEST(OmfdTest, HugeTauIsThePlainMean) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Eigen::MatrixXd p = 60.0 + 20.0 * testing::RandomMatrix(5, 7, seed).array();
    const EnsembleReport r = OmfdFuse(p, Names(5), {1e9, std::nullopt});
    EXPECT_TRUE(r.removed.empty());
    const Eigen::VectorXd mean = p.colwise().sum().transpose() / 5.0;
    EXPECT_EQ(r.fused, mean);
  }
  const EnsembleReport r = OmfdFuse(HandTraceRows(), kThree,
                                    {std::numeric_limits<double>::infinity(), std::nullopt});
  EXPECT_TRUE(r.removed.empty());
}

TEST(OmfdTest, IdenticalRowsAreNeverRemoved) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(4, 3, 72.5);
  for (double tau : {1e-9, 1.0, 100.0}) {
    const EnsembleReport r = OmfdFuse(p, Names(4), {tau, std::nullopt});
    EXPECT_TRUE(r.removed.empty());
    EXPECT_EQ(r.fused, Eigen::Vector3d::Constant(72.5));
  }
}

TEST(OmfdTest, PermutationChangesOnlyLabels) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const int m = 6;
    Eigen::MatrixXd p = 70.0 + 3.0 * testing::RandomMatrix(m, 5, seed).array();
    p.row(rng.UniformIndex(m)).array() += 25.0;
    p.row(rng.UniformIndex(m)).array() -= 12.0;
    const std::vector<std::string> names = Names(m);
    const EnsembleReport base = OmfdFuse(p, names, {5.0, std::nullopt});

    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(perm);
    Eigen::MatrixXd q(m, 5);
    std::vector<std::string> q_names(m);
    for (int i = 0; i < m; ++i) {
      q.row(i) = p.row(perm[i]);
      q_names[i] = names[perm[i]];
    }
    const EnsembleReport shuffled = OmfdFuse(q, q_names, {5.0, std::nullopt});
    std::vector<std::string> a = base.Survivors(), b = shuffled.Survivors();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b) << "seed " << seed;
    EXPECT_LE((base.fused - shuffled.fused).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(OmfdTest, FusedStaysWithinSurvivorRange) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::MatrixXd p = 50.0 + 15.0 * testing::RandomMatrix(5, 4, seed).array();
    const EnsembleReport r = OmfdFuse(p, Names(5), {8.0, std::nullopt});
    const std::vector<std::string> names = Names(5);
    for (Eigen::Index t = 0; t < 4; ++t) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const std::string& s : r.Survivors()) {
        const auto row = std::find(names.begin(), names.end(), s) - names.begin();
        lo = std::min(lo, p(row, t));
        hi = std::max(hi, p(row, t));
      }
      EXPECT_GE(r.fused(t), lo - 1e-12);
      EXPECT_LE(r.fused(t), hi + 1e-12);
    }
  }
}

TEST(OmfdTest, TiesRemoveTheLowestIndex) {
  Eigen::MatrixXd p(3, 1);
  p << 40, 60, 50;
  // Median 50; rows 0 and 1 are both 10 away.
  const EnsembleReport r = OmfdFuse(p, kThree, {5.0, std::nullopt});
  ASSERT_FALSE(r.removed.empty());
  EXPECT_EQ(r.removed[0].method, "m1");
}

TEST(OmfdTest, StopsBeforeEmptyingTheSet) {
  Eigen::MatrixXd p(2, 1);
  p << 0, 100;
  OmfdOptions opts;
  opts.tau = 1.0;
  opts.fixed_centroid = Eigen::VectorXd::Constant(1, 50.0);
  const EnsembleReport r = OmfdFuse(p, {"a", "b"}, opts);
  EXPECT_EQ(r.removed.size(), 1u);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.Survivors().size(), 1u);
}

TEST(OmfdTest, FixedCentroidIsUsedEveryRound) {
  OmfdOptions opts;
  opts.tau = 10.0;
  opts.fixed_centroid = Eigen::Vector3d(95, 95, 95);
  const EnsembleReport r = OmfdFuse(HandTraceRows(), kThree, opts);
  ASSERT_EQ(r.removed.size(), 2u);
  EXPECT_EQ(r.removed[0].method, "m1");
  EXPECT_EQ(r.removed[1].method, "m2");
  EXPECT_EQ(r.fused, Eigen::Vector3d(95, 95, 95));
}

TEST(OmfdTest, SelectOnValidationThenFuseTarget) {
  const Eigen::MatrixXd target = Eigen::Vector3d(70, 71, 20);
  const EnsembleReport r =
      OmfdSelectAndFuse(HandTraceRows(), target, kThree, {10.0, std::nullopt});
  EXPECT_EQ(r.Survivors(), (std::vector<std::string>{"m1", "m2"}));
  ASSERT_EQ(r.fused.size(), 1);
  EXPECT_EQ(r.fused(0), 70.5);
  EXPECT_EQ(r.selection, "validation");
  EXPECT_AUTOEVAL_ERROR(
      OmfdSelectAndFuse(HandTraceRows(), Eigen::Vector2d(1, 2), kThree, {}),
      ErrorCode::kDimensionMismatch);
}

TEST(OmfdTest, RejectsBadInput) {
  EXPECT_ANY_THROW(OmfdFuse(Eigen::MatrixXd(0, 3), {}, {}));
  EXPECT_ANY_THROW(OmfdFuse(HandTraceRows(), {"a", "b"}, {}));
  EXPECT_ANY_THROW(OmfdFuse(HandTraceRows(), kThree, {0.0, std::nullopt}));
  Eigen::MatrixXd bad = HandTraceRows();
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_AUTOEVAL_ERROR(OmfdFuse(bad, kThree, {}), ErrorCode::kNonFinite);
}

TEST(OmfdTest, ReportJsonHasTheFields) {
  EnsembleReport r = OmfdFuse(HandTraceRows(), kThree, {});
  r.datasets = {"d0", "d1", "d2"};
  const std::string json = EnsembleReportToJson(r);
  for (const char* key : {"\"methods\"", "\"predictions\"", "\"centroid\"", "\"removed\"",
                          "\"tau\"", "\"fused\"", "\"degenerate\"", "\"selection\"",
                          "\"datasets\""}) {
    EXPECT_NE(json.find(key), std::string::npos) << key;
  }
}

}  // namespace
}  // namespace autoeval
