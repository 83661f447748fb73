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

#include "json_codec.h"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "autoeval/error.h"

namespace autoeval {
namespace internal {
namespace {

constexpr std::string_view kKernelRidgeNote =
    "RBF kernel ridge regression used in place of support vector regression";

json HyperToJson(const BaseHyper& h) {
  return json{{"knn_neighbors", h.knn_neighbors},
              {"forest_trees", h.forest_trees},
              {"forest_min_leaf", h.forest_min_leaf},
              {"forest_max_depth", h.forest_max_depth},
              {"forest_max_features", h.forest_max_features},
              {"kr_lambda", Decimal(h.kr_lambda)},
              {"kr_bandwidth", Decimal(h.kr_bandwidth)}};
}

BaseHyper HyperFromJson(const json& j) {
  BaseHyper h;
  h.knn_neighbors = j.at("knn_neighbors").get<int>();
  h.forest_trees = j.at("forest_trees").get<int>();
  h.forest_min_leaf = j.at("forest_min_leaf").get<int>();
  h.forest_max_depth = j.at("forest_max_depth").get<int>();
  h.forest_max_features = j.at("forest_max_features").get<int>();
  h.kr_lambda = ParseDecimal(j.at("kr_lambda"));
  h.kr_bandwidth = ParseDecimal(j.at("kr_bandwidth"));
  return h;
}

json TreeToJson(const std::vector<TreeNode>& tree) {
  // Columns: feature, threshold, left, right, value.
  json nodes = json::array();
  for (const TreeNode& node : tree) {
    nodes.push_back(json::array({node.feature, Decimal(node.threshold), node.left,
                                 node.right, Decimal(node.value)}));
  }
  return nodes;
}

std::vector<TreeNode> TreeFromJson(const json& j) {
  std::vector<TreeNode> tree;
  for (const json& node : j) {
    tree.push_back(TreeNode{node.at(0).get<int>(), ParseDecimal(node.at(1)),
                            node.at(2).get<int>(), node.at(3).get<int>(),
                            ParseDecimal(node.at(4))});
  }
  return tree;
}

json BaseToJson(const TrainedRegressor& reg) {
  json j;
  j["format"] = "autoeval.regressor";
  j["version"] = 1;
  j["kind"] = std::string(RegressorKindName(reg.kind));
  j["feature_dim"] = reg.feature_dim;
  j["hyper"] = HyperToJson(reg.hyper);
  json state;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, OlsState>) {
          state["weights"] = EncodeVector(s.weights);
          state["intercept"] = Decimal(s.intercept);
        } else if constexpr (std::is_same_v<T, KnnState>) {
          state["inputs"] = EncodeMatrix(s.inputs);
          state["targets"] = EncodeVector(s.targets);
          state["neighbors"] = s.neighbors;
        } else if constexpr (std::is_same_v<T, ForestState>) {
          json trees = json::array();
          for (const auto& tree : s.trees) trees.push_back(TreeToJson(tree));
          state["trees"] = std::move(trees);
        } else {
          state["inputs"] = EncodeMatrix(s.inputs);
          state["dual"] = EncodeVector(s.dual);
          state["bandwidth"] = Decimal(s.bandwidth);
          state["lambda"] = Decimal(s.lambda);
          state["offset"] = Decimal(s.offset);
          j["note"] = std::string(kKernelRidgeNote);
        }
      },
      reg.state);
  j["state"] = std::move(state);
  return j;
}

TrainedRegressor BaseFromJson(const json& j) {
  if (j.value("format", std::string()) != "autoeval.regressor") {
    throw Error(ErrorCode::kInvalidArgument, "not a regressor document");
  }
  TrainedRegressor reg;
  reg.kind = ParseRegressorKind(j.at("kind").get<std::string>());
  reg.feature_dim = j.at("feature_dim").get<int>();
  reg.hyper = HyperFromJson(j.at("hyper"));
  const json& s = j.at("state");
  switch (reg.kind) {
    case RegressorKind::kOls:
      reg.state = OlsState{DecodeVector(s.at("weights")),
                           ParseDecimal(s.at("intercept"))};
      break;
    case RegressorKind::kKnn:
      reg.state = KnnState{DecodeMatrix(s.at("inputs")),
                           DecodeVector(s.at("targets")),
                           s.at("neighbors").get<int>()};
      break;
    case RegressorKind::kRandomForest: {
      ForestState forest;
      for (const json& tree : s.at("trees")) forest.trees.push_back(TreeFromJson(tree));
      reg.state = std::move(forest);
      break;
    }
    case RegressorKind::kKernelRidge:
      reg.state = KernelRidgeState{DecodeMatrix(s.at("inputs")),
                                   DecodeVector(s.at("dual")),
                                   ParseDecimal(s.at("bandwidth")),
                                   ParseDecimal(s.at("lambda")),
                                   ParseDecimal(s.at("offset"))};
      break;
  }
  return reg;
}

}  // namespace

std::string Decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ParseDecimal(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string text = j.get<std::string>();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    throw Error(ErrorCode::kInvalidArgument, "bad decimal '" + text + "'");
  }
  return v;
}

json EncodeVector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(Decimal(v(i)));
  return out;
}

Eigen::VectorXd DecodeVector(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = ParseDecimal(j.at(i));
  return v;
}

json EncodeMatrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(EncodeVector(m.row(r)));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd DecodeMatrix(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) {
    throw Error(ErrorCode::kPayloadShape, "matrix row count");
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = DecodeVector(data.at(r));
    if (row.size() != cols) throw Error(ErrorCode::kPayloadShape, "matrix column count");
    m.row(r) = row;
  }
  return m;
}

json EncodeDoubles(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(Decimal(x));
  return out;
}

std::vector<double> DecodeDoubles(const json& j) {
  std::vector<double> out;
  for (const json& x : j) out.push_back(ParseDecimal(x));
  return out;
}

json RegressorToJson(const AnyRegressor& reg) {
  if (const auto* base = std::get_if<TrainedRegressor>(&reg)) return BaseToJson(*base);
  const auto& drm = std::get<DrmModel>(reg);
  json bases = json::array();
  for (const auto& b : drm.bases) bases.push_back(BaseToJson(b));
  return json{{"format", "autoeval.drm"},
              {"version", 1},
              {"meta", drm.meta == MetaMode::kNnls ? "nnls" : "vote"},
              {"folds", drm.folds},
              {"weights", EncodeDoubles(drm.weights)},
              {"bases", std::move(bases)}};
}

AnyRegressor RegressorFromJson(const json& j) {
  if (j.value("format", std::string()) != "autoeval.drm") return BaseFromJson(j);
  DrmModel drm;
  const std::string meta = j.at("meta").get<std::string>();
  if (meta != "nnls" && meta != "vote") {
    throw Error(ErrorCode::kInvalidArgument, "unknown meta mode '" + meta + "'");
  }
  drm.meta = meta == "nnls" ? MetaMode::kNnls : MetaMode::kVote;
  drm.folds = j.at("folds").get<int>();
  drm.weights = DecodeDoubles(j.at("weights"));
  for (const json& b : j.at("bases")) drm.bases.push_back(BaseFromJson(b));
  if (drm.weights.size() != drm.bases.size() || drm.bases.empty()) {
    throw Error(ErrorCode::kPayloadShape, "DRM weights do not match bases");
  }
  return drm;
}

}  // namespace internal

std::string SerializeRegressor(const AnyRegressor& reg) {
  return internal::RegressorToJson(reg).dump(1) + "\n";
}

AnyRegressor ParseRegressor(std::string_view text) {
  try {
    return internal::RegressorFromJson(internal::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("malformed regressor document: ") + e.what());
  }
}

}  // namespace autoeval
