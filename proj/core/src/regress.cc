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

#include "autoeval/regress.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "autoeval/error.h"
#include "autoeval/random.h"

namespace autoeval {
namespace {

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void CheckDim(int expected, std::span<const double> x) {
  if (static_cast<int>(x.size()) != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                "regressor expects " + std::to_string(expected) +
                    " features, got " + std::to_string(x.size()));
  }
}

double SquaredDistance(const Eigen::MatrixXd& m, Eigen::Index row,
                       std::span<const double> x) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double diff = m(row, c) - x[c];
    sum += diff * diff;
  }
  return sum;
}

// ---- OLS -------------------------------------------------------------------

OlsState FitOls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design << x, Eigen::VectorXd::Ones(x.rows());
  // Complete orthogonal decomposition yields the minimum-norm solution when
  // the design is rank deficient.
  const Eigen::VectorXd beta =
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(design).solve(y);
  OlsState s;
  s.weights = beta.head(x.cols());
  s.intercept = beta(x.cols());
  return s;
}

double PredictOls(const OlsState& s, std::span<const double> x) {
  double out = s.intercept;
  for (Eigen::Index i = 0; i < s.weights.size(); ++i) out += s.weights(i) * x[i];
  return out;
}

// ---- KNN -------------------------------------------------------------------

double PredictKnn(const KnnState& s, std::span<const double> x) {
  const Eigen::Index n = s.inputs.rows();
  std::vector<std::pair<double, Eigen::Index>> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = {SquaredDistance(s.inputs, i, x), i};
  const auto k = std::min<Eigen::Index>(s.neighbors, n);
  // Pairs compare by distance, then by row index.
  std::partial_sort(order.begin(), order.begin() + k, order.end());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) sum += s.targets(order[i].second);
  return sum / static_cast<double>(k);
}

// ---- Random forest ---------------------------------------------------------

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
              const BaseHyper& hyper, Rng& rng)
      : x_(x), y_(y), hyper_(hyper), rng_(rng) {
    const int p = static_cast<int>(x.cols());
    mtry_ = hyper.forest_max_features > 0
                ? std::min(hyper.forest_max_features, p)
                : std::max(1, p / 3);
  }

  std::vector<TreeNode> Build(std::vector<Eigen::Index> rows) {
    nodes_.clear();
    Grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int Grow(std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double mean = 0.0;
    for (Eigen::Index r : rows) mean += y_(r);
    mean /= static_cast<double>(rows.size());
    nodes_[id].value = mean;

    const auto min_leaf = static_cast<std::size_t>(hyper_.forest_min_leaf);
    if (depth >= hyper_.forest_max_depth || rows.size() < 2 * min_leaf) return id;

    std::vector<int> features(x_.cols());
    std::iota(features.begin(), features.end(), 0);
    rng_.Shuffle(features);
    features.resize(mtry_);

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = 1e-12;
    const double n = static_cast<double>(rows.size());
    double total = 0.0, total_sq = 0.0;
    for (Eigen::Index r : rows) {
      total += y_(r);
      total_sq += y_(r) * y_(r);
    }
    const double parent_sse = total_sq - total * total / n;
    std::vector<Eigen::Index> sorted = rows;
    for (int f : features) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return x_(a, f) < x_(b, f); });
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double v = y_(sorted[i]);
        left_sum += v;
        left_sq += v * v;
        const std::size_t left_n = i + 1;
        const std::size_t right_n = sorted.size() - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double lo = x_(sorted[i], f);
        const double hi = x_(sorted[i + 1], f);
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / left_n) +
                           (right_sq - right_sum * right_sum / right_n);
        const double gain = parent_sse - sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (Eigen::Index r : rows) {
      (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = Grow(left, depth + 1);
    const int r = Grow(right, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const BaseHyper& hyper_;
  Rng& rng_;
  int mtry_ = 1;
  std::vector<TreeNode> nodes_;
};

ForestState FitForest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const BaseHyper& hyper, std::uint64_t seed) {
  ForestState s;
  const Eigen::Index n = x.rows();
  for (int t = 0; t < hyper.forest_trees; ++t) {
    Rng rng(MixSeed(seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> bootstrap(n);
    for (auto& r : bootstrap) r = static_cast<Eigen::Index>(rng.UniformIndex(n));
    TreeBuilder builder(x, y, hyper, rng);
    s.trees.push_back(builder.Build(std::move(bootstrap)));
  }
  return s;
}

double PredictTree(const std::vector<TreeNode>& tree, std::span<const double> x) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                         : tree[node].right;
  }
  return tree[node].value;
}

double PredictForest(const ForestState& s, std::span<const double> x) {
  double sum = 0.0;
  for (const auto& tree : s.trees) sum += PredictTree(tree, x);
  return sum / static_cast<double>(s.trees.size());
}

// ---- Kernel ridge ----------------------------------------------------------

double MedianPairwiseDistance(const Eigen::MatrixXd& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double v = (x.row(i) - x.row(j)).norm();
      if (v > 0.0) d.push_back(v);
    }
  }
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

KernelRidgeState FitKernelRidge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const BaseHyper& hyper) {
  KernelRidgeState s;
  s.inputs = x;
  s.lambda = hyper.kr_lambda;
  s.bandwidth = hyper.kr_bandwidth > 0.0 ? hyper.kr_bandwidth
                                         : MedianPairwiseDistance(x);
  s.offset = y.mean();
  const Eigen::Index n = x.rows();
  const double denom = 2.0 * s.bandwidth * s.bandwidth;
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      gram(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / denom);
    }
  }
  gram.diagonal().array() += s.lambda;
  s.dual = gram.ldlt().solve((y.array() - s.offset).matrix());
  return s;
}

double PredictKernelRidge(const KernelRidgeState& s, std::span<const double> x) {
  const double denom = 2.0 * s.bandwidth * s.bandwidth;
  double out = s.offset;
  for (Eigen::Index i = 0; i < s.inputs.rows(); ++i) {
    out += s.dual(i) * std::exp(-SquaredDistance(s.inputs, i, x) / denom);
  }
  return out;
}

void CheckHyper(const BaseHyper& h) {
  if (h.knn_neighbors < 1 || h.forest_trees < 1 || h.forest_min_leaf < 1 ||
      h.forest_max_depth < 1 || h.forest_max_features < 0 ||
      !(h.kr_lambda > 0.0) || !(h.kr_bandwidth >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "hyperparameter out of range");
  }
}

}  // namespace

int TrainingTable::dim() const {
  return rows.empty() ? 0 : static_cast<int>(rows.front().features.size());
}

void TrainingTable::Validate() const {
  const int p = dim();
  if (p < 1 && !rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "training rows need >= 1 feature");
  }
  for (const auto& row : rows) {
    if (static_cast<int>(row.features.size()) != p) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row '" + row.sample_id + "' has a different feature count");
    }
    if (!(row.accuracy >= 0.0 && row.accuracy <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "row '" + row.sample_id + "' accuracy outside [0,1]");
    }
    for (double v : row.features) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFinite, "row '" + row.sample_id + "'");
      }
    }
  }
}

Eigen::MatrixXd TrainingTable::Inputs() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < dim(); ++c) x(i, c) = rows[i].features[c];
  }
  return x;
}

Eigen::VectorXd TrainingTable::Targets() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(i) = rows[i].accuracy;
  return y;
}

TrainingTable TrainingTable::Subset(std::span<const std::size_t> indices) const {
  TrainingTable out;
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) out.rows.push_back(rows.at(i));
  return out;
}

std::string_view RegressorKindName(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::kOls:
      return "ols";
    case RegressorKind::kKnn:
      return "knn";
    case RegressorKind::kRandomForest:
      return "random_forest";
    case RegressorKind::kKernelRidge:
      return "kernel_ridge";
  }
  return "ols";
}

RegressorKind ParseRegressorKind(std::string_view name) {
  if (name == "ols") return RegressorKind::kOls;
  if (name == "knn") return RegressorKind::kKnn;
  if (name == "random_forest") return RegressorKind::kRandomForest;
  if (name == "kernel_ridge") return RegressorKind::kKernelRidge;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown regressor kind '" + std::string(name) + "'");
}

TrainedRegressor FitBase(RegressorKind kind, const TrainingTable& table,
                         const BaseHyper& hyper, std::uint64_t seed) {
  table.Validate();
  if (table.rows.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least 2 training rows");
  }
  CheckHyper(hyper);
  const Eigen::MatrixXd x = table.Inputs();
  const Eigen::VectorXd y = table.Targets();

  TrainedRegressor reg;
  reg.kind = kind;
  reg.feature_dim = table.dim();
  reg.hyper = hyper;
  switch (kind) {
    case RegressorKind::kOls:
      reg.state = FitOls(x, y);
      break;
    case RegressorKind::kKnn:
      reg.state = KnnState{x, y, hyper.knn_neighbors};
      break;
    case RegressorKind::kRandomForest:
      reg.state = FitForest(x, y, hyper, seed);
      break;
    case RegressorKind::kKernelRidge:
      reg.state = FitKernelRidge(x, y, hyper);
      break;
  }
  return reg;
}

double PredictRaw(const TrainedRegressor& reg, std::span<const double> x) {
  CheckDim(reg.feature_dim, x);
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, OlsState>) return PredictOls(s, x);
        if constexpr (std::is_same_v<T, KnnState>) return PredictKnn(s, x);
        if constexpr (std::is_same_v<T, ForestState>) return PredictForest(s, x);
        if constexpr (std::is_same_v<T, KernelRidgeState>) {
          return PredictKernelRidge(s, x);
        }
      },
      reg.state);
}

double Predict(const TrainedRegressor& reg, std::span<const double> x) {
  return Clamp01(PredictRaw(reg, x));
}

Eigen::MatrixXd OutOfFoldPredictions(const TrainingTable& table,
                                     const DrmOptions& options) {
  table.Validate();
  const std::size_t n = table.rows.size();
  const auto folds = static_cast<std::size_t>(std::max(options.folds, 0));
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "DRM needs >= 2 folds");
  if (n < 2 * folds) {
    throw Error(ErrorCode::kInvalidArgument,
                "DRM needs at least 2 rows per fold (" + std::to_string(n) +
                    " rows, " + std::to_string(folds) + " folds)");
  }
  if (options.bases.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "DRM needs at least one base");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);
  rng.Shuffle(order);

  Eigen::MatrixXd oof(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(options.bases.size()));
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n / folds;
    const std::size_t end = (f + 1) * n / folds;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < begin || i >= end) train.push_back(order[i]);
    }
    const TrainingTable fold_table = table.Subset(train);
    for (std::size_t b = 0; b < options.bases.size(); ++b) {
      const TrainedRegressor reg =
          FitBase(options.bases[b], fold_table, options.hyper,
                  MixSeed(options.seed, 1 + f * options.bases.size() + b));
      for (std::size_t i = begin; i < end; ++i) {
        oof(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(b)) =
            Predict(reg, table.rows[order[i]].features);
      }
    }
  }
  return oof;
}

Eigen::VectorXd NonNegativeLeastSquares(const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& b,
                                        double tolerance) {
  if (a.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "NNLS: A rows must equal b size");
  }
  const Eigen::Index m = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<bool> passive(m, false);

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (passive[j]) idx.push_back(j);
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = a.col(idx[c]);
    const Eigen::VectorXd z =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(sub).solve(b);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    for (std::size_t c = 0; c < idx.size(); ++c) s(idx[c]) = z(c);
    return s;
  };

  Eigen::VectorXd w = a.transpose() * (b - a * x);
  for (Eigen::Index outer = 0; outer < 3 * m + 3; ++outer) {
    Eigen::Index best = -1;
    double best_w = tolerance;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[best] = true;
    Eigen::VectorXd s = solve_passive();
    for (Eigen::Index inner = 0; inner < 3 * m + 3; ++inner) {
      bool feasible = true;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[j] && s(j) <= tolerance) feasible = false;
      }
      if (feasible) break;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[j] && s(j) <= tolerance) {
          alpha = std::min(alpha, x(j) / (x(j) - s(j)));
        }
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[j] && x(j) <= tolerance) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
      s = solve_passive();
    }
    x = s;
    w = a.transpose() * (b - a * x);
  }
  return x.cwiseMax(0.0);
}

DrmModel DrmFit(const TrainingTable& table, const DrmOptions& options) {
  const Eigen::MatrixXd oof = OutOfFoldPredictions(table, options);
  const std::size_t m = options.bases.size();
  DrmModel model;
  model.folds = options.folds;
  model.meta = options.meta;
  model.weights.assign(m, 1.0 / static_cast<double>(m));
  if (options.meta == MetaMode::kNnls) {
    const Eigen::VectorXd w = NonNegativeLeastSquares(oof, table.Targets());
    // An all-zero solution leaves nothing to combine; fall back to voting.
    if (w.maxCoeff() > 0.0) model.weights.assign(w.data(), w.data() + w.size());
  }
  for (std::size_t b = 0; b < m; ++b) {
    model.bases.push_back(FitBase(options.bases[b], table, options.hyper,
                                  MixSeed(options.seed, 0x5eed0000 + b)));
  }
  return model;
}

double DrmPredict(const DrmModel& model, std::span<const double> x) {
  double out = 0.0;
  for (std::size_t b = 0; b < model.bases.size(); ++b) {
    out += model.weights[b] * Predict(model.bases[b], x);
  }
  return Clamp01(out);
}

double Predict(const AnyRegressor& reg, std::span<const double> x) {
  if (const auto* base = std::get_if<TrainedRegressor>(&reg)) return Predict(*base, x);
  const auto& drm = std::get<DrmModel>(reg);
  if (drm.bases.empty()) throw Error(ErrorCode::kInvalidArgument, "empty DRM model");
  CheckDim(drm.bases.front().feature_dim, x);
  return DrmPredict(drm, x);
}

int FeatureDim(const AnyRegressor& reg) {
  if (const auto* base = std::get_if<TrainedRegressor>(&reg)) return base->feature_dim;
  const auto& drm = std::get<DrmModel>(reg);
  return drm.bases.empty() ? 0 : drm.bases.front().feature_dim;
}

std::string RegressorLabel(const AnyRegressor& reg) {
  if (const auto* base = std::get_if<TrainedRegressor>(&reg)) {
    return std::string(RegressorKindName(base->kind));
  }
  return "drm";
}

}  // namespace autoeval
