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

#include "autoeval/shift_distance.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "autoeval/error.h"

namespace autoeval {
namespace {

Eigen::VectorXd ClampedEigenvalues(const Eigen::MatrixXd& sym,
                                   Eigen::MatrixXd* vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      sym, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNonFinite, "eigendecomposition did not converge");
  }
  if (vectors) *vectors = solver.eigenvectors();
  return solver.eigenvalues();
}

Eigen::MatrixXd SqrtFromEigen(const Eigen::MatrixXd& vectors,
                              const Eigen::VectorXd& values) {
  const Eigen::VectorXd roots = values.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s = vectors * roots.asDiagonal() * vectors.transpose();
  return 0.5 * (s + s.transpose());
}

// Square root without the negativity check; used inside the Frechet formula
// where round-off can push eigenvalues of large matrices slightly below zero.
Eigen::MatrixXd ClampedSqrt(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd vectors;
  const Eigen::VectorXd values =
      ClampedEigenvalues(0.5 * (a + a.transpose()), &vectors);
  return SqrtFromEigen(vectors, values);
}

// Optimal assignment by the O(n^3) shortest augmenting path method with
// potentials. On return cost(i, j) - u[i] - v[j] >= 0 for every pair, with
// equality on the matched pairs.
void SolveAssignment(const Eigen::MatrixXd& cost, std::vector<int>* match,
                     std::vector<double>* row_potential,
                     std::vector<double>* col_potential) {
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  match->assign(n, -1);
  for (int j = 1; j <= n; ++j) (*match)[p[j] - 1] = j - 1;
  row_potential->assign(u.begin() + 1, u.end());
  col_potential->assign(v.begin() + 1, v.end());
}

Eigen::MatrixXd RowsOf(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                       int cluster) {
  const auto count = std::count(labels.begin(), labels.end(), cluster);
  Eigen::MatrixXd out(count, x.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (labels[i] == cluster) out.row(r++) = x.row(i);
  }
  return out;
}

}  // namespace

GaussianStats GaussianFit(const Eigen::MatrixXd& points, double eps_scale) {
  const Eigen::Index m = points.rows();
  const Eigen::Index d = points.cols();
  if (m < 1 || d < 1) {
    throw Error(ErrorCode::kInvalidArgument, "gaussian fit needs m >= 1, d >= 1");
  }
  if (!points.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "gaussian fit input");
  }
  if (!(eps_scale >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "eps_scale must be >= 0");
  }
  GaussianStats g;
  g.count = m;
  g.mean = points.colwise().mean().transpose();
  g.covariance = Eigen::MatrixXd::Zero(d, d);
  if (m > 1) {
    const Eigen::MatrixXd centered = points.rowwise() - g.mean.transpose();
    g.covariance = (centered.transpose() * centered) / static_cast<double>(m - 1);
    g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
  }
  const double ridge =
      eps_scale * g.covariance.trace() / static_cast<double>(d) + 1e-12;
  g.covariance.diagonal().array() += ridge;
  return g;
}

Eigen::MatrixXd PsdSqrt(const Eigen::MatrixXd& a, double tolerance) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "psd_sqrt needs a square matrix");
  }
  if (!a.allFinite()) throw Error(ErrorCode::kNonFinite, "psd_sqrt input");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tolerance) {
    throw Error(ErrorCode::kInvalidArgument, "psd_sqrt input is not symmetric");
  }
  Eigen::MatrixXd vectors;
  const Eigen::VectorXd values =
      ClampedEigenvalues(0.5 * (a + a.transpose()), &vectors);
  if (values.minCoeff() < -tolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "psd_sqrt input has eigenvalue " + std::to_string(values.minCoeff()));
  }
  return SqrtFromEigen(vectors, values);
}

double FrechetDistance(const GaussianStats& g1, const GaussianStats& g2) {
  const Eigen::Index d = g1.mean.size();
  if (g2.mean.size() != d || g1.covariance.rows() != d ||
      g2.covariance.rows() != d || g1.covariance.cols() != d ||
      g2.covariance.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "gaussians of dimension " + std::to_string(d) + " and " +
                    std::to_string(g2.mean.size()));
  }
  // Identical inputs give exactly zero instead of a round-off residual.
  if (g1.mean == g2.mean && g1.covariance == g2.covariance) return 0.0;

  const Eigen::MatrixXd root1 = ClampedSqrt(g1.covariance);
  const Eigen::MatrixXd inner = root1 * g2.covariance * root1;
  const Eigen::VectorXd values =
      ClampedEigenvalues(0.5 * (inner + inner.transpose()), nullptr);
  const double trace_cross = values.cwiseMax(0.0).cwiseSqrt().sum();
  const double squared = (g1.mean - g2.mean).squaredNorm() +
                         g1.covariance.trace() + g2.covariance.trace() -
                         2.0 * trace_cross;
  return std::sqrt(std::max(squared, 0.0));
}

std::vector<int> HungarianMatch(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost matrix must be square");
  }
  if (!cost.allFinite()) throw Error(ErrorCode::kNonFinite, "cost matrix");
  const int k = static_cast<int>(cost.rows());
  if (k == 0) return {};
  std::vector<int> col_of;
  std::vector<double> u, v;
  SolveAssignment(cost, &col_of, &u, &v);

  // A matching is optimal exactly when it uses only tight pairs (zero reduced
  // cost). Walk the rows in order and give each the smallest column that
  // still extends to a perfect tight matching of the remaining rows.
  const double tol = 1e-9 * (1.0 + cost.cwiseAbs().maxCoeff());
  auto tight = [&](int i, int j) { return cost(i, j) - u[i] - v[j] <= tol; };
  std::vector<int> row_of(k);
  for (int i = 0; i < k; ++i) row_of[col_of[i]] = i;
  std::vector<bool> fixed_col(k, false);
  std::vector<int> prev_row(k);
  std::vector<bool> seen(k);
  std::vector<int> queue;
  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) {
      if (fixed_col[col] || !tight(row, col)) continue;
      if (col_of[row] == col) break;
      // Rematch: row takes col, so col's owner must reach row's old column
      // along an alternating path through rows after `row`.
      const int start = row_of[col];
      const int target = col_of[row];
      std::fill(seen.begin(), seen.end(), false);
      seen[col] = true;
      queue.assign(1, start);
      bool found = false;
      for (std::size_t head = 0; head < queue.size() && !found; ++head) {
        const int x = queue[head];
        for (int y = 0; y < k; ++y) {
          if (seen[y] || fixed_col[y] || !tight(x, y)) continue;
          seen[y] = true;
          prev_row[y] = x;
          if (y == target) {
            found = true;
            break;
          }
          queue.push_back(row_of[y]);
        }
      }
      if (!found) continue;
      for (int y = target;;) {
        const int x = prev_row[y];
        const int next = col_of[x];
        col_of[x] = y;
        row_of[y] = x;
        if (x == start) break;
        y = next;
      }
      col_of[row] = col;
      row_of[col] = row;
      break;
    }
    fixed_col[col_of[row]] = true;
  }
  return col_of;
}

std::string_view SignatureModeName(SignatureMode mode) {
  return mode == SignatureMode::kCentersGaussian ? "centers_gaussian"
                                                 : "matched_percluster";
}

SignatureMode ParseSignatureMode(std::string_view name) {
  if (name == "centers_gaussian") return SignatureMode::kCentersGaussian;
  if (name == "matched_percluster") return SignatureMode::kMatchedPerCluster;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown signature mode '" + std::string(name) + "'");
}

std::vector<double> ShiftSignature::Features(bool full) const {
  std::vector<double> out{global_fd};
  if (full) {
    out.push_back(matched_center_dist);
    out.insert(out.end(), per_cluster_fd.begin(), per_cluster_fd.end());
  }
  return out;
}

ReferenceClustering ClusterReference(const FeatureBundle& ref,
                                     const SignatureOptions& options) {
  ReferenceClustering out;
  out.features = ref.FeaturesAsDouble();
  out.model = KMeansFit(out.features, options.kmeans());
  return out;
}

ShiftSignature KcfcaSignature(const ReferenceClustering& ref,
                              const FeatureBundle& sample,
                              const SignatureOptions& options) {
  if (sample.dim() != ref.features.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "reference has d=" + std::to_string(ref.features.cols()) +
                    ", sample '" + sample.id + "' has d=" +
                    std::to_string(sample.dim()));
  }
  if (ref.model.k != options.k) {
    throw Error(ErrorCode::kInvalidArgument,
                "reference clustering was fit with a different k");
  }
  const Eigen::MatrixXd x = sample.FeaturesAsDouble();
  const ClusterModel fitted = KMeansFit(x, options.kmeans());
  const Eigen::MatrixXd& ref_centers = ref.model.centers;
  const int k = options.k;

  Eigen::MatrixXd cost(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      cost(i, j) = (ref_centers.row(i) - fitted.centers.row(j)).norm();
    }
  }
  const std::vector<int> match = HungarianMatch(cost);

  ShiftSignature sig;
  sig.mode = options.mode;
  double center_sum = 0.0;
  sig.per_cluster_fd.reserve(k);
  for (int i = 0; i < k; ++i) {
    center_sum += cost(i, match[i]);
    const Eigen::MatrixXd ref_pts = RowsOf(ref.features, ref.model.assignments, i);
    const Eigen::MatrixXd sample_pts = RowsOf(x, fitted.assignments, match[i]);
    // A cluster can only be empty when max_iter stops Lloyd early after a
    // re-seed; fall back to the center itself.
    const GaussianStats g_ref = GaussianFit(
        ref_pts.rows() > 0 ? ref_pts : Eigen::MatrixXd(ref_centers.row(i)),
        options.eps_scale);
    const GaussianStats g_sample =
        GaussianFit(sample_pts.rows() > 0
                        ? sample_pts
                        : Eigen::MatrixXd(fitted.centers.row(match[i])),
                    options.eps_scale);
    sig.per_cluster_fd.push_back(FrechetDistance(g_ref, g_sample));
  }
  std::sort(sig.per_cluster_fd.begin(), sig.per_cluster_fd.end());
  sig.matched_center_dist = center_sum / static_cast<double>(k);

  if (options.mode == SignatureMode::kCentersGaussian) {
    sig.global_fd = FrechetDistance(GaussianFit(ref_centers, options.eps_scale),
                                    GaussianFit(fitted.centers, options.eps_scale));
  } else {
    sig.global_fd = std::accumulate(sig.per_cluster_fd.begin(),
                                    sig.per_cluster_fd.end(), 0.0) /
                    static_cast<double>(k);
  }
  return sig;
}

ShiftSignature KcfcaSignature(const FeatureBundle& ref,
                              const FeatureBundle& sample,
                              const SignatureOptions& options) {
  if (ref.dim() != sample.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "bundles differ in d");
  }
  if (ref.size() < options.k || sample.size() < options.k) {
    throw Error(ErrorCode::kInvalidArgument, "both bundles need n >= k");
  }
  return KcfcaSignature(ClusterReference(ref, options), sample, options);
}

}  // namespace autoeval
