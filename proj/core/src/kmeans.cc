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

#include "autoeval/kmeans.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "autoeval/error.h"
#include "autoeval/random.h"

namespace autoeval {
namespace {

double SquaredDistance(const Eigen::MatrixXd& a, Eigen::Index i,
                       const Eigen::MatrixXd& b, Eigen::Index j) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double diff = a(i, c) - b(j, c);
    sum += diff * diff;
  }
  return sum;
}

// Returns the nearest center and writes its squared distance.
int Nearest(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& x,
            Eigen::Index row, double* best_dist) {
  int best = 0;
  double best_d = SquaredDistance(x, row, centers, 0);
  for (Eigen::Index c = 1; c < centers.rows(); ++c) {
    const double d = SquaredDistance(x, row, centers, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  *best_dist = best_d;
  return best;
}

double AssignInto(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& x,
                  std::vector<int>& labels, std::vector<double>& dists) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    labels[i] = Nearest(centers, x, i, &dists[i]);
    inertia += dists[i];
  }
  return inertia;
}

Eigen::MatrixXd PlusPlusSeeding(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.UniformIndex(n)));
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = SquaredDistance(x, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const std::size_t pick = rng.Categorical(d2);
    centers.row(c) = x.row(static_cast<Eigen::Index>(pick));
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], SquaredDistance(x, i, centers, c));
    }
  }
  return centers;
}

// Recomputes centers as cluster means. Empty clusters take the point that is
// currently worst served by its center. Returns true if any re-seed happened.
bool UpdateCenters(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                   const std::vector<double>& dists, Eigen::MatrixXd& centers) {
  const int k = static_cast<int>(centers.rows());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
  std::vector<Eigen::Index> counts(k, 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(labels[i]) += x.row(i);
    ++counts[labels[i]];
  }
  bool reseeded = false;
  std::vector<bool> taken(x.rows(), false);
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      continue;
    }
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!taken[i] && dists[i] > far_d) {
        far_d = dists[i];
        far = i;
      }
    }
    taken[far] = true;
    centers.row(c) = x.row(far);
    reseeded = true;
  }
  return reseeded;
}

}  // namespace

ClusterModel KMeansFit(const Eigen::MatrixXd& features,
                       const KMeansOptions& options,
                       const InertiaTrace& trace) {
  const Eigen::Index n = features.rows();
  if (options.k < 1 || n < options.k) {
    throw Error(ErrorCode::kInvalidArgument,
                "k-means needs n >= k >= 1 (n=" + std::to_string(n) +
                    ", k=" + std::to_string(options.k) + ")");
  }
  if (features.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "k-means needs d >= 1");
  }
  if (!(options.tol >= 0.0) || options.max_iter < 0) {
    throw Error(ErrorCode::kInvalidArgument, "tol must be >= 0, max_iter >= 0");
  }
  if (!features.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "k-means input contains NaN or inf");
  }

  Rng rng(options.seed);
  ClusterModel model;
  model.k = options.k;
  model.seed = options.seed;
  model.centers = PlusPlusSeeding(features, options.k, rng);
  model.assignments.assign(n, 0);
  std::vector<double> dists(n, 0.0);
  model.inertia = AssignInto(model.centers, features, model.assignments, dists);
  if (trace) trace(0, model.inertia);

  std::vector<int> next(n, 0);
  for (int it = 1; it <= options.max_iter; ++it) {
    Eigen::MatrixXd previous = model.centers;
    const bool reseeded =
        UpdateCenters(features, model.assignments, dists, model.centers);
    const double shift = (model.centers - previous).cwiseAbs().maxCoeff();
    model.inertia = AssignInto(model.centers, features, next, dists);
    model.iterations_run = it;
    if (trace) trace(it, model.inertia);
    const bool stable = !reseeded && next == model.assignments;
    model.assignments.swap(next);
    if (stable) {
      model.converged = true;
      break;
    }
    if (!reseeded && shift < options.tol) break;
  }
  return model;
}

std::vector<int> AssignToCenters(const Eigen::MatrixXd& centers,
                                 const Eigen::MatrixXd& features) {
  if (centers.rows() < 1 || centers.cols() != features.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "features have " + std::to_string(features.cols()) +
                    " columns, centers have " + std::to_string(centers.cols()));
  }
  std::vector<int> labels(features.rows());
  std::vector<double> dists(features.rows());
  AssignInto(centers, features, labels, dists);
  return labels;
}

std::vector<int> Assign(const ClusterModel& model,
                        const Eigen::MatrixXd& features) {
  return AssignToCenters(model.centers, features);
}

double SilhouetteScore(const Eigen::MatrixXd& features,
                       std::span<const int> assignments) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "silhouette needs n >= 2");
  if (static_cast<Eigen::Index>(assignments.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "one assignment per row required");
  }
  int k = 0;
  for (int a : assignments) {
    if (a < 0) throw Error(ErrorCode::kInvalidArgument, "negative cluster index");
    k = std::max(k, a + 1);
  }
  std::vector<Eigen::Index> sizes(k, 0);
  for (int a : assignments) ++sizes[a];
  const auto non_empty = std::count_if(sizes.begin(), sizes.end(),
                                       [](Eigen::Index s) { return s > 0; });
  if (non_empty < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "silhouette needs at least two non-empty clusters");
  }

  double total = 0.0;
  std::vector<double> sum_to(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = assignments[i];
    if (sizes[own] == 1) continue;
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[assignments[j]] += std::sqrt(SquaredDistance(features, i, features, j));
    }
    const double a = sum_to[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, sum_to[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace autoeval
