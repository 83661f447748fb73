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

#include "autoeval/omfd.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "autoeval/error.h"

namespace autoeval {
namespace {

struct Selection {
  std::vector<bool> alive;
  std::vector<RemovedMethod> removed;
  Eigen::VectorXd centroid;
  bool degenerate = false;
};

Eigen::MatrixXd AliveRows(const Eigen::MatrixXd& m, const std::vector<bool>& alive) {
  const auto count = std::count(alive.begin(), alive.end(), true);
  Eigen::MatrixXd out(count, m.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (alive[i]) out.row(r++) = m.row(i);
  }
  return out;
}

void CheckInput(const Eigen::MatrixXd& predictions,
                const std::vector<std::string>& methods, const OmfdOptions& options) {
  if (predictions.rows() < 1 || predictions.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "OMFD needs at least one method and dataset");
  }
  if (static_cast<Eigen::Index>(methods.size()) != predictions.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "one method name per prediction row");
  }
  if (!predictions.allFinite()) throw Error(ErrorCode::kNonFinite, "OMFD predictions");
  if (!(options.tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be > 0");
  if (options.fixed_centroid && options.fixed_centroid->size() != predictions.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "centroid length must equal T");
  }
}

Selection SelectSurvivors(const Eigen::MatrixXd& predictions,
                          const std::vector<std::string>& methods,
                          const OmfdOptions& options) {
  const Eigen::Index m = predictions.rows();
  const double norm = std::sqrt(static_cast<double>(predictions.cols()));
  Selection sel;
  sel.alive.assign(m, true);
  while (true) {
    sel.centroid = options.fixed_centroid ? *options.fixed_centroid
                                          : Centroid(AliveRows(predictions, sel.alive));
    Eigen::Index worst = -1;
    double worst_d = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!sel.alive[i]) continue;
      const double d = (predictions.row(i).transpose() - sel.centroid).norm() / norm;
      if (d > worst_d) {
        worst_d = d;
        worst = i;
      }
    }
    if (worst_d <= options.tau) break;
    if (std::count(sel.alive.begin(), sel.alive.end(), true) == 1) {
      sel.degenerate = true;
      break;
    }
    sel.alive[worst] = false;
    sel.removed.push_back({methods[worst], worst_d});
  }
  return sel;
}

EnsembleReport MakeReport(const Eigen::MatrixXd& target,
                          const std::vector<std::string>& methods,
                          const OmfdOptions& options, Selection sel) {
  EnsembleReport report;
  report.methods = methods;
  report.predictions = target;
  report.tau = options.tau;
  report.removed = std::move(sel.removed);
  report.degenerate = sel.degenerate;
  report.centroid = std::move(sel.centroid);
  report.fused = AliveRows(target, sel.alive).colwise().mean().transpose();
  return report;
}

}  // namespace

std::vector<std::string> EnsembleReport::Survivors() const {
  std::vector<std::string> out;
  for (const auto& name : methods) {
    const bool gone = std::any_of(removed.begin(), removed.end(),
                                  [&](const RemovedMethod& r) { return r.method == name; });
    if (!gone) out.push_back(name);
  }
  return out;
}

Eigen::VectorXd Centroid(const Eigen::MatrixXd& predictions) {
  if (predictions.rows() < 1 || predictions.cols() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "centroid of an empty matrix");
  }
  const Eigen::Index m = predictions.rows();
  Eigen::VectorXd out(predictions.cols());
  std::vector<double> column(m);
  for (Eigen::Index t = 0; t < predictions.cols(); ++t) {
    for (Eigen::Index i = 0; i < m; ++i) column[i] = predictions(i, t);
    std::sort(column.begin(), column.end());
    out(t) = m % 2 == 1 ? column[m / 2]
                        : 0.5 * (column[m / 2 - 1] + column[m / 2]);
  }
  return out;
}

EnsembleReport OmfdFuse(const Eigen::MatrixXd& predictions,
                        const std::vector<std::string>& methods,
                        const OmfdOptions& options) {
  CheckInput(predictions, methods, options);
  return MakeReport(predictions, methods, options,
                    SelectSurvivors(predictions, methods, options));
}

EnsembleReport OmfdSelectAndFuse(const Eigen::MatrixXd& selection,
                                 const Eigen::MatrixXd& target,
                                 const std::vector<std::string>& methods,
                                 const OmfdOptions& options) {
  CheckInput(selection, methods, options);
  OmfdOptions target_options = options;
  target_options.fixed_centroid.reset();
  CheckInput(target, methods, target_options);
  Selection sel = SelectSurvivors(selection, methods, options);
  // Report the centroid of the survivors on the fused datasets.
  sel.centroid = Centroid(AliveRows(target, sel.alive));
  EnsembleReport report = MakeReport(target, methods, options, std::move(sel));
  report.selection = "validation";
  return report;
}

std::string EnsembleReportToJson(const EnsembleReport& report) {
  using json = nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  json predictions = json::array();
  for (Eigen::Index i = 0; i < report.predictions.rows(); ++i) {
    predictions.push_back(vec(report.predictions.row(i).transpose()));
  }
  json removed = json::array();
  for (const auto& r : report.removed) {
    removed.push_back({{"method", r.method}, {"distance", r.distance}});
  }
  json j = {{"methods", report.methods},
                  {"predictions", std::move(predictions)},
                  {"centroid", vec(report.centroid)},
                  {"removed", std::move(removed)},
                  {"tau", report.tau},
                  {"fused", vec(report.fused)},
                  {"degenerate", report.degenerate},
                  {"selection", report.selection}};
  if (!report.datasets.empty()) j["datasets"] = report.datasets;
  return j.dump(2) + "\n";
}

}  // namespace autoeval
