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

#ifndef AUTOEVAL_REGRESS_H_
#define AUTOEVAL_REGRESS_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace autoeval {

struct TrainingRow {
  std::vector<double> features;
  double accuracy = 0.0;  // fraction in [0, 1]
  std::string sample_id;
};

struct TrainingTable {
  std::vector<TrainingRow> rows;

  int dim() const;
  // Throws unless every row has the same width and accuracies lie in [0, 1].
  void Validate() const;
  Eigen::MatrixXd Inputs() const;
  Eigen::VectorXd Targets() const;
  TrainingTable Subset(std::span<const std::size_t> indices) const;
};

enum class RegressorKind { kOls, kKnn, kRandomForest, kKernelRidge };

std::string_view RegressorKindName(RegressorKind kind);
RegressorKind ParseRegressorKind(std::string_view name);

struct BaseHyper {
  int knn_neighbors = 5;
  int forest_trees = 100;
  int forest_min_leaf = 2;
  int forest_max_depth = 32;
  // Features tried per split; 0 picks max(1, p / 3).
  int forest_max_features = 0;
  double kr_lambda = 1e-3;
  // RBF bandwidth; 0 selects the median pairwise distance.
  double kr_bandwidth = 0.0;

  friend bool operator==(const BaseHyper&, const BaseHyper&) = default;
};

struct OlsState {
  Eigen::VectorXd weights;
  double intercept = 0.0;
};

struct KnnState {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  int neighbors = 5;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct ForestState {
  std::vector<std::vector<TreeNode>> trees;
};

// RBF kernel ridge regression, standing in for support vector regression.
struct KernelRidgeState {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd dual;
  double bandwidth = 1.0;
  double lambda = 1e-3;
  double offset = 0.0;  // target mean; the kernel part models residuals
};

struct TrainedRegressor {
  RegressorKind kind = RegressorKind::kOls;
  int feature_dim = 0;
  BaseHyper hyper;
  std::variant<OlsState, KnnState, ForestState, KernelRidgeState> state;
};

TrainedRegressor FitBase(RegressorKind kind, const TrainingTable& table,
                         const BaseHyper& hyper, std::uint64_t seed);

// Unclamped model output.
double PredictRaw(const TrainedRegressor& reg, std::span<const double> x);
// Model output clamped to the accuracy range [0, 1].
double Predict(const TrainedRegressor& reg, std::span<const double> x);

enum class MetaMode { kNnls, kVote };

struct DrmOptions {
  std::vector<RegressorKind> bases = {RegressorKind::kOls, RegressorKind::kKnn,
                                      RegressorKind::kRandomForest,
                                      RegressorKind::kKernelRidge};
  int folds = 5;
  std::uint64_t seed = 17;
  MetaMode meta = MetaMode::kNnls;
  BaseHyper hyper;
};

struct DrmModel {
  std::vector<TrainedRegressor> bases;
  std::vector<double> weights;
  int folds = 5;
  MetaMode meta = MetaMode::kNnls;
};

// Out-of-fold base predictions: row per training example, column per base.
// Folds are contiguous blocks of a seeded shuffle of the row order.
Eigen::MatrixXd OutOfFoldPredictions(const TrainingTable& table,
                                     const DrmOptions& options);

// min |A x - b|^2 subject to x >= 0 (Lawson-Hanson active set).
Eigen::VectorXd NonNegativeLeastSquares(const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& b,
                                        double tolerance = 1e-10);

DrmModel DrmFit(const TrainingTable& table, const DrmOptions& options);
double DrmPredict(const DrmModel& model, std::span<const double> x);

// A fitted accuracy regressor of either shape, as persisted to disk.
using AnyRegressor = std::variant<TrainedRegressor, DrmModel>;

double Predict(const AnyRegressor& reg, std::span<const double> x);
int FeatureDim(const AnyRegressor& reg);
std::string RegressorLabel(const AnyRegressor& reg);

// JSON with every number written as a 17-significant-digit decimal string so
// that a reloaded model predicts bit-identically.
std::string SerializeRegressor(const AnyRegressor& reg);
AnyRegressor ParseRegressor(std::string_view text);

}  // namespace autoeval

#endif  // AUTOEVAL_REGRESS_H_
