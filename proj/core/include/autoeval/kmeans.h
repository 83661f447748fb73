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

#ifndef AUTOEVAL_KMEANS_H_
#define AUTOEVAL_KMEANS_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace autoeval {

struct KMeansOptions {
  int k = 10;
  std::uint64_t seed = 17;
  int max_iter = 300;
  // Stop once no center coordinate moves by this much.
  double tol = 1e-6;
};

struct ClusterModel {
  Eigen::MatrixXd centers;  // k x d
  std::vector<int> assignments;
  // Sum of squared distances from each point to its assigned center.
  double inertia = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  int iterations_run = 0;
  // True when Lloyd reached a fixed point (assignments stopped changing).
  bool converged = false;

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

// Called with the inertia after the initial assignment (iteration 0) and
// after every Lloyd iteration.
using InertiaTrace = std::function<void(int iteration, double inertia)>;

// Lloyd's algorithm from a k-means++ seeding. Deterministic for a fixed seed.
// A cluster that loses all its points is re-seeded to the point with the
// largest distance to its assigned center.
ClusterModel KMeansFit(const Eigen::MatrixXd& features,
                       const KMeansOptions& options,
                       const InertiaTrace& trace = {});

// Nearest-center index per row; ties go to the lowest center index.
std::vector<int> AssignToCenters(const Eigen::MatrixXd& centers,
                                 const Eigen::MatrixXd& features);
std::vector<int> Assign(const ClusterModel& model,
                        const Eigen::MatrixXd& features);

// Mean silhouette coefficient over all points using Euclidean distance.
// Members of singleton clusters score 0.
double SilhouetteScore(const Eigen::MatrixXd& features,
                       std::span<const int> assignments);

}  // namespace autoeval

#endif  // AUTOEVAL_KMEANS_H_
