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

#ifndef AUTOEVAL_SYNTHGEN_H_
#define AUTOEVAL_SYNTHGEN_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "autoeval/bundle.h"

namespace autoeval {

inline constexpr double kDefaultLogitScale = 5.0;

// A Gaussian-mixture feature space with a fixed nearest-mean classifier.
// Class c draws features from N(class_means.row(c), class_cov_scale^2 * I).
// The classifier's logit for class c is -logit_scale * |x - mean_c|.
struct SynthWorld {
  int num_classes = 0;
  int dim = 0;
  Eigen::MatrixXd class_means;  // C x d
  double class_cov_scale = 1.0;
  double logit_scale = kDefaultLogitScale;
  std::uint64_t seed = 0;
};

// Class means form a regular simplex with edge length `separation`, rotated
// into R^d by a seeded random orthogonal matrix. Requires d >= C - 1.
SynthWorld GenWorld(int num_classes, int dim, double separation,
                    std::uint64_t seed, double class_cov_scale = 1.0);

struct ShiftSpec {
  double noise_sigma = 0.0;
  Eigen::VectorXd mean_shift;  // empty means zero shift
  std::vector<double> class_prior;  // empty means uniform
  int n = 1000;
  std::uint64_t seed = 0;
};

// Samples a labeled, scored bundle. Logits are scaled negative distances to
// the class means, so the stored accuracy is exact for the fixed scorer.
FeatureBundle GenShiftedBundle(const SynthWorld& world, const ShiftSpec& spec,
                               const std::string& id = "synthetic");

// Argmax agreement between logits and labels, ties to the lowest class.
double OracleAccuracy(const FeatureBundle& bundle);

// Class prior proportional to exp(strength * g_c) with seeded g ~ N(0, 1);
// strength 0 is uniform.
std::vector<double> SkewedPrior(int num_classes, double strength,
                                std::uint64_t seed);

// Unit vector in a seeded random direction.
Eigen::VectorXd RandomDirection(int dim, std::uint64_t seed);

struct WorldConfig {
  int num_classes = 10;
  int dim = 32;
  double separation = 4.25;
  double class_cov_scale = 1.0;
  double logit_scale = kDefaultLogitScale;
  std::uint64_t seed = 1;
};

SynthWorld MakeWorld(const WorldConfig& config);

// A cartesian grid of shifts. Every grid point draws `replicates` bundles.
struct ShiftGrid {
  WorldConfig world;
  std::vector<double> sigmas = {0.0};
  std::vector<double> shift_norms = {0.0};
  std::vector<double> prior_strengths = {0.0};
  int n = 1000;
  int replicates = 1;
  std::uint64_t base_seed = 100;
  std::string id_prefix = "g";
};

struct GridPoint {
  std::string id;
  ShiftSpec spec;
};

std::vector<GridPoint> ExpandGrid(const SynthWorld& world, const ShiftGrid& grid);

// Parses the grid file format:
//   {"world": {...}, "sigmas": [...], "shift_norms": [...],
//    "prior_temperatures": [...], "n": 500, "replicates": 1, "base_seed": 7}
ShiftGrid ParseShiftGrid(const std::string& json_text);

}  // namespace autoeval

#endif  // AUTOEVAL_SYNTHGEN_H_
