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

#ifndef AUTOEVAL_OMFD_H_
#define AUTOEVAL_OMFD_H_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace autoeval {

inline constexpr double kDefaultTau = 10.0;

struct RemovedMethod {
  std::string method;
  double distance = 0.0;
};

// Outlier-pruned fusion of several accuracy estimators. Values are in
// percentage points.
struct EnsembleReport {
  std::vector<std::string> methods;
  Eigen::MatrixXd predictions;  // m methods x T datasets
  Eigen::VectorXd centroid;     // centroid of the final surviving set
  std::vector<RemovedMethod> removed;  // in removal order
  double tau = kDefaultTau;
  Eigen::VectorXd fused;
  // Set when the loop stopped because removing another row would leave none.
  bool degenerate = false;
  // Where survivors were chosen: "target" (the fused datasets themselves) or
  // "validation" (a separate labeled set).
  std::string selection = "target";
  // Optional dataset ids, one per column.
  std::vector<std::string> datasets;

  std::vector<std::string> Survivors() const;
};

// Coordinate-wise median of the rows; the two middle values are averaged for
// an even row count.
Eigen::VectorXd Centroid(const Eigen::MatrixXd& predictions);

struct OmfdOptions {
  double tau = kDefaultTau;
  // Hand-picked centroid used in every iteration instead of the median.
  std::optional<Eigen::VectorXd> fixed_centroid;
};

// Repeatedly drops the surviving method farthest from the centroid while its
// RMS deviation (Euclidean distance / sqrt(T)) exceeds tau, one method per
// round, ties to the lowest row. Survivors are averaged.
EnsembleReport OmfdFuse(const Eigen::MatrixXd& predictions,
                        const std::vector<std::string>& methods,
                        const OmfdOptions& options = {});

// Same removal loop, but the surviving set is chosen on `selection`
// predictions and then applied to fuse `target` (rows aligned by method).
EnsembleReport OmfdSelectAndFuse(const Eigen::MatrixXd& selection,
                                 const Eigen::MatrixXd& target,
                                 const std::vector<std::string>& methods,
                                 const OmfdOptions& options = {});

std::string EnsembleReportToJson(const EnsembleReport& report);

}  // namespace autoeval

#endif  // AUTOEVAL_OMFD_H_
