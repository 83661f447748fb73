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

#include "autoeval/scores.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "autoeval/error.h"
#include "autoeval/shift_distance.h"

namespace autoeval {
namespace {

Eigen::MatrixXd Probabilities(const FeatureBundle& bundle) {
  if (!bundle.logits) {
    throw Error(ErrorCode::kMissingData, "bundle '" + bundle.id + "' has no logits");
  }
  return SoftmaxRows(bundle.LogitsAsDouble());
}

std::vector<double> Confidences(const FeatureBundle& bundle) {
  const Eigen::MatrixXd p = Probabilities(bundle);
  std::vector<double> conf(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) conf[i] = p.row(i).maxCoeff();
  return conf;
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kConfScore:
      return "conf_score";
    case Method::kEntropy:
      return "entropy";
    case Method::kAtc:
      return "atc";
    case Method::kFid:
      return "fid";
    case Method::kKcfca:
      return "kcfca";
  }
  return "kcfca";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kConfScore, Method::kEntropy, Method::kAtc, Method::kFid,
                   Method::kKcfca}) {
    if (MethodName(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "'");
}

Eigen::MatrixXd SoftmaxRows(const Eigen::MatrixXd& logits) {
  if (!logits.allFinite()) throw Error(ErrorCode::kNonFinite, "softmax input");
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

double ConfScore(const FeatureBundle& bundle) {
  const std::vector<double> conf = Confidences(bundle);
  double sum = 0.0;
  for (double c : conf) sum += c;
  return sum / static_cast<double>(conf.size());
}

double EntropyScore(const FeatureBundle& bundle) {
  const Eigen::MatrixXd p = Probabilities(bundle);
  const Eigen::Index classes = p.cols();
  if (classes < 2) return 0.0;
  const double norm = std::log(static_cast<double>(classes));
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double v = p(i, c);
      if (v > 0.0) h -= v * std::log(v);
    }
    total += std::clamp(h / norm, 0.0, 1.0);
  }
  return total / static_cast<double>(p.rows());
}

AtcThreshold AtcFit(const FeatureBundle& source) {
  std::vector<double> conf = Confidences(source);
  double accuracy;
  if (source.accuracy) {
    accuracy = *source.accuracy;
  } else if (source.labels) {
    accuracy = ArgmaxAgreement(*source.logits, *source.labels);
  } else {
    throw Error(ErrorCode::kMissingData,
                "ATC source '" + source.id + "' needs accuracy or labels");
  }
  std::sort(conf.begin(), conf.end());
  const double n = static_cast<double>(conf.size());

  AtcThreshold th;
  th.source_accuracy = accuracy;
  th.threshold = conf.front() - 1e-12;
  // Scan from the largest confidence down; the exceedance fraction only grows
  // as the candidate threshold drops.
  for (std::size_t i = conf.size(); i-- > 0;) {
    const double c = conf[i];
    const auto above = conf.end() - std::upper_bound(conf.begin(), conf.end(), c);
    if (static_cast<double>(above) / n >= accuracy) {
      th.threshold = c;
      break;
    }
  }
  return th;
}

double AtcPredict(const AtcThreshold& threshold, const FeatureBundle& target) {
  const std::vector<double> conf = Confidences(target);
  const auto above = std::count_if(conf.begin(), conf.end(), [&](double c) {
    return c > threshold.threshold;
  });
  return static_cast<double>(above) / static_cast<double>(conf.size());
}

double FidScore(const FeatureBundle& ref, const FeatureBundle& sample,
                double eps_scale) {
  if (ref.dim() != sample.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "FID between d=" + std::to_string(ref.dim()) + " and d=" +
                    std::to_string(sample.dim()));
  }
  return FrechetDistance(GaussianFit(ref.FeaturesAsDouble(), eps_scale),
                         GaussianFit(sample.FeaturesAsDouble(), eps_scale));
}

}  // namespace autoeval
