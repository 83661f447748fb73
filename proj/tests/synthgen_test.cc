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


#include "autoeval/synthgen.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "autoeval/bundle.h"
#include "autoeval/shift_distance.h"
#include "test_util.h"

namespace autoeval {
namespace {

// Independent argmax count with first-maximum ties.
double CountArgmaxEquals(const FeatureBundle& b, int cls) {
  int hits = 0;
  for (Eigen::Index i = 0; i < b.logits->rows(); ++i) {
    int best = 0;
    for (int c = 1; c < b.logits->cols(); ++c) {
      if ((*b.logits)(i, c) > (*b.logits)(i, best)) best = c;
    }
    hits += best == cls;
  }
  return static_cast<double>(hits) / static_cast<double>(b.size());
}

TEST(WorldTest, TwoClassesOnALine) {
  const SynthWorld w = GenWorld(2, 1, 4.0, 3);
  std::vector<double> means = {w.class_means(0, 0), w.class_means(1, 0)};
  std::sort(means.begin(), means.end());
  EXPECT_NEAR(means[0], -2.0, 1e-12);
  EXPECT_NEAR(means[1], 2.0, 1e-12);
}

TEST(WorldTest, MeansAreEquidistant) {
  for (int c : {3, 5, 10}) {
    const SynthWorld w = GenWorld(c, 32, 4.25, static_cast<std::uint64_t>(c));
    for (int i = 0; i < c; ++i) {
      for (int j = i + 1; j < c; ++j) {
        EXPECT_NEAR((w.class_means.row(i) - w.class_means.row(j)).norm(), 4.25, 1e-9);
      }
    }
  }
}

TEST(WorldTest, DeterministicPerSeed) {
  const SynthWorld a = GenWorld(10, 32, 4.25, 7);
  const SynthWorld b = GenWorld(10, 32, 4.25, 7);
  const SynthWorld c = GenWorld(10, 32, 4.25, 8);
  EXPECT_EQ(a.class_means, b.class_means);
  EXPECT_NE(a.class_means, c.class_means);
}

TEST(WorldTest, RejectsInvalidParameters) {
  EXPECT_AUTOEVAL_ERROR(GenWorld(1, 4, 1.0, 1), ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(GenWorld(5, 3, 1.0, 1), ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(GenWorld(3, 4, 0.0, 1), ErrorCode::kInvalidArgument);
  WorldConfig cfg;
  cfg.logit_scale = 0.0;
  EXPECT_AUTOEVAL_ERROR(MakeWorld(cfg), ErrorCode::kInvalidArgument);
}

TEST(BundleGenTest, WideSeparationIsNearlyPerfect) {
  const SynthWorld w = GenWorld(10, 32, 10.0, 1);
  ShiftSpec spec;
  spec.n = 4000;
  spec.seed = 2;
  const FeatureBundle b = GenShiftedBundle(w, spec);
  EXPECT_GE(*b.accuracy, 0.99);
}

TEST(BundleGenTest, OverwhelmingNoiseIsChance) {
  const SynthWorld w = GenWorld(10, 32, 4.25, 1);
  ShiftSpec spec;
  spec.n = 10000;
  spec.noise_sigma = 1000.0;
  spec.seed = 3;
  const FeatureBundle b = GenShiftedBundle(w, spec);
  EXPECT_NEAR(*b.accuracy, 0.1, 0.05);
}

TEST(BundleGenTest, OneHotPriorScoresAsThatClass) {
  const SynthWorld w = GenWorld(10, 32, 4.25, 1);
  ShiftSpec spec;
  spec.n = 1000;
  spec.seed = 4;
  spec.class_prior.assign(10, 0.0);
  spec.class_prior[3] = 1.0;
  const FeatureBundle b = GenShiftedBundle(w, spec);
  for (std::uint32_t label : *b.labels) ASSERT_EQ(label, 3u);
  EXPECT_EQ(*b.accuracy, CountArgmaxEquals(b, 3));
}

TEST(BundleGenTest, BaseAccuracyIsAboutNinetyPercent) {
  const SynthWorld w = MakeWorld(WorldConfig{});
  ShiftSpec spec;
  spec.n = 20000;
  spec.seed = 5;
  EXPECT_NEAR(*GenShiftedBundle(w, spec).accuracy, 0.90, 0.03);
}

TEST(BundleGenTest, AccuracyFallsWithNoise) {
  const SynthWorld w = GenWorld(10, 32, 4.25, 2);
  double prev = 1.0;
  for (double sigma : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    ShiftSpec spec;
    spec.n = 5000;
    spec.seed = 6;
    spec.noise_sigma = sigma;
    const double acc = *GenShiftedBundle(w, spec).accuracy;
    EXPECT_LE(acc, prev + 0.005) << "sigma " << sigma;
    prev = acc;
  }
}

TEST(BundleGenTest, GlobalFdRisesWithNoise) {
  const SynthWorld w = GenWorld(10, 32, 4.25, 3);
  ShiftSpec spec;
  spec.n = 3000;
  spec.seed = 7;
  const FeatureBundle ref = GenShiftedBundle(w, spec, "ref");
  const SignatureOptions opts;
  const ReferenceClustering cached = ClusterReference(ref, opts);
  double prev = -1.0;
  for (double sigma : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    spec.noise_sigma = sigma;
    const double fd = KcfcaSignature(cached, GenShiftedBundle(w, spec), opts).global_fd;
    EXPECT_GE(fd, prev) << "sigma " << sigma;
    prev = fd;
  }
}

TEST(BundleGenTest, BundlesAreValidAndAccuracyIsExact) {
  const SynthWorld w = GenWorld(5, 8, 3.0, 4);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ShiftSpec spec;
    spec.n = 50 + static_cast<int>(seed);
    spec.seed = seed;
    spec.noise_sigma = 0.2 * static_cast<double>(seed);
    spec.mean_shift = 0.5 * RandomDirection(8, seed);
    spec.class_prior = SkewedPrior(5, 0.5, seed);
    const FeatureBundle b = GenShiftedBundle(w, spec, "b" + std::to_string(seed));
    EXPECT_NO_THROW(ValidateBundle(b));
    EXPECT_EQ(*b.accuracy, OracleAccuracy(b));
    EXPECT_EQ(b.source, BundleSource::kSynthetic);
    EXPECT_EQ(b.num_classes, 5);
    EXPECT_EQ(GenShiftedBundle(w, spec, b.id), b);
  }
}

TEST(BundleGenTest, LogitsAreScaledNegativeDistances) {
  const SynthWorld w = GenWorld(3, 4, 2.0, 5);
  ShiftSpec spec;
  spec.n = 20;
  spec.seed = 1;
  const FeatureBundle b = GenShiftedBundle(w, spec);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double dist = (b.features.row(i).cast<double>() - w.class_means.row(c)).norm();
      EXPECT_NEAR((*b.logits)(i, c), -w.logit_scale * dist, 1e-4);
    }
  }
}

TEST(BundleGenTest, RejectsBadSpecs) {
  const SynthWorld w = GenWorld(3, 4, 2.0, 5);
  ShiftSpec spec;
  spec.n = 0;
  EXPECT_AUTOEVAL_ERROR(GenShiftedBundle(w, spec), ErrorCode::kInvalidArgument);
  spec.n = 5;
  spec.noise_sigma = -1.0;
  EXPECT_AUTOEVAL_ERROR(GenShiftedBundle(w, spec), ErrorCode::kInvalidArgument);
  spec.noise_sigma = 0.0;
  spec.mean_shift = Eigen::VectorXd::Zero(3);
  EXPECT_AUTOEVAL_ERROR(GenShiftedBundle(w, spec), ErrorCode::kDimensionMismatch);
  spec.mean_shift.resize(0);
  spec.class_prior = {0.5, 0.5, 0.5};
  EXPECT_AUTOEVAL_ERROR(GenShiftedBundle(w, spec), ErrorCode::kInvalidArgument);
  spec.class_prior = {0.5, 0.5};
  EXPECT_AUTOEVAL_ERROR(GenShiftedBundle(w, spec), ErrorCode::kDimensionMismatch);
}

TEST(OracleAccuracyTest, Examples) {
  FeatureBundle b;
  b.features = FloatMatrix::Zero(2, 1);
  FloatMatrix logits(2, 2);
  logits << 2, 0, 0, 2;
  b.logits = logits;
  b.labels = std::vector<std::uint32_t>{0, 1};
  EXPECT_EQ(OracleAccuracy(b), 1.0);
  b.labels = std::vector<std::uint32_t>{1, 0};
  EXPECT_EQ(OracleAccuracy(b), 0.0);
  FloatMatrix tie(1, 2);
  tie << 1, 1;
  b.logits = tie;
  b.labels = std::vector<std::uint32_t>{0};
  EXPECT_EQ(OracleAccuracy(b), 1.0);
  b.labels.reset();
  EXPECT_AUTOEVAL_ERROR(OracleAccuracy(b), ErrorCode::kMissingData);
}

TEST(SkewedPriorTest, SumsToOneAndZeroStrengthIsUniform) {
  for (double s : {0.0, 0.5, 2.0}) {
    const std::vector<double> p = SkewedPrior(7, s, 3);
    double total = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    if (s == 0.0) {
      for (double v : p) EXPECT_NEAR(v, 1.0 / 7, 1e-15);
    }
  }
}

TEST(GridTest, ParsesAndExpands) {
  const ShiftGrid grid = ParseShiftGrid(R"({
    "world": {"C": 4, "d": 6, "separation": 3.0, "seed": 9, "logit_scale": 2.0},
    "sigmas": [0, 1], "shift_norms": [0, 0.5, 1], "prior_temperatures": [0, 1],
    "n": 30, "replicates": 2, "base_seed": 5, "id_prefix": "t"})");
  EXPECT_EQ(grid.world.num_classes, 4);
  EXPECT_EQ(grid.world.dim, 6);
  EXPECT_EQ(grid.world.logit_scale, 2.0);
  EXPECT_EQ(grid.n, 30);
  const SynthWorld w = MakeWorld(grid.world);
  const std::vector<GridPoint> points = ExpandGrid(w, grid);
  ASSERT_EQ(points.size(), 24u);
  std::set<std::string> ids;
  for (const GridPoint& p : points) {
    ids.insert(p.id);
    EXPECT_EQ(p.id.rfind("t", 0), 0u);
    EXPECT_EQ(p.spec.n, 30);
    EXPECT_EQ(p.spec.mean_shift.size(), 6);
  }
  EXPECT_EQ(ids.size(), points.size());
  EXPECT_NEAR(points[4].spec.mean_shift.norm(), 0.5, 1e-12);
  EXPECT_EQ(ExpandGrid(w, grid)[5].spec.seed, points[5].spec.seed);
}

TEST(GridTest, RejectsMalformedInput) {
  EXPECT_AUTOEVAL_ERROR(ParseShiftGrid("{"), ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(ParseShiftGrid(R"({"sigmas": []})"), ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(ParseShiftGrid(R"({"sigmas": "x"})"), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace autoeval
