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

#ifndef AUTOEVAL_SHIFT_DISTANCE_H_
#define AUTOEVAL_SHIFT_DISTANCE_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "autoeval/bundle.h"
#include "autoeval/kmeans.h"

namespace autoeval {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::Index count = 0;

  friend bool operator==(const GaussianStats&, const GaussianStats&) = default;
};

// Column means and the unbiased sample covariance of `points` (zero for a
// single point), regularized by (eps_scale * trace / d + 1e-12) * I.
GaussianStats GaussianFit(const Eigen::MatrixXd& points, double eps_scale);

// Symmetric PSD square root via eigendecomposition. Eigenvalues in
// [-tolerance, 0) are clamped to zero; anything lower is an error.
Eigen::MatrixXd PsdSqrt(const Eigen::MatrixXd& a, double tolerance = 1e-8);

// Frechet (2-Wasserstein) distance between two Gaussians:
//   sqrt(|m1 - m2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)).
double FrechetDistance(const GaussianStats& g1, const GaussianStats& g2);

// Minimum-cost perfect matching on a square cost matrix. result[row] is the
// matched column. Among optimal matchings the lexicographically smallest is
// returned.
std::vector<int> HungarianMatch(const Eigen::MatrixXd& cost);

enum class SignatureMode { kCentersGaussian, kMatchedPerCluster };

std::string_view SignatureModeName(SignatureMode mode);
SignatureMode ParseSignatureMode(std::string_view name);

struct SignatureOptions {
  int k = 10;
  SignatureMode mode = SignatureMode::kCentersGaussian;
  std::uint64_t seed = 17;
  int max_iter = 300;
  double tol = 1e-6;
  double eps_scale = 1e-6;

  KMeansOptions kmeans() const { return {k, seed, max_iter, tol}; }
};

struct ShiftSignature {
  // centers_gaussian: distance between Gaussians fit to the two center sets.
  // matched_percluster: mean of per_cluster_fd.
  double global_fd = 0.0;
  // Mean Euclidean distance between matched center pairs.
  double matched_center_dist = 0.0;
  // Per matched cluster pair, sorted ascending. Length k.
  std::vector<double> per_cluster_fd;
  SignatureMode mode = SignatureMode::kCentersGaussian;

  // Regression input: {global_fd} or {global_fd, matched_center_dist,
  // per_cluster_fd...}.
  std::vector<double> Features(bool full) const;
};

// The reference side of a signature, clustered once and reused across many
// samples. Output is identical to re-clustering for a fixed seed.
struct ReferenceClustering {
  Eigen::MatrixXd features;
  ClusterModel model;
};

ReferenceClustering ClusterReference(const FeatureBundle& ref,
                                     const SignatureOptions& options);

ShiftSignature KcfcaSignature(const ReferenceClustering& ref,
                              const FeatureBundle& sample,
                              const SignatureOptions& options);
ShiftSignature KcfcaSignature(const FeatureBundle& ref,
                              const FeatureBundle& sample,
                              const SignatureOptions& options);

}  // namespace autoeval

#endif  // AUTOEVAL_SHIFT_DISTANCE_H_
