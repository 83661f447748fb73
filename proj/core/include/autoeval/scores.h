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

#ifndef AUTOEVAL_SCORES_H_
#define AUTOEVAL_SCORES_H_

#include <string>
#include <string_view>

#include <Eigen/Core>

#include "autoeval/bundle.h"

namespace autoeval {

enum class Method { kConfScore, kEntropy, kAtc, kFid, kKcfca };

std::string_view MethodName(Method method);
Method ParseMethod(std::string_view name);

struct MethodScore {
  Method method = Method::kConfScore;
  double value = 0.0;
  std::string bundle_id;
};

// Row-wise softmax with the row maximum subtracted first.
Eigen::MatrixXd SoftmaxRows(const Eigen::MatrixXd& logits);

// Mean max-softmax probability, in [1/C, 1].
double ConfScore(const FeatureBundle& bundle);

// Mean prediction entropy divided by ln C, in [0, 1].
double EntropyScore(const FeatureBundle& bundle);

struct AtcThreshold {
  double threshold = 0.0;
  double source_accuracy = 0.0;
};

// Picks the largest source confidence t whose strict exceedance fraction still
// reaches the source accuracy.
AtcThreshold AtcFit(const FeatureBundle& source);
// Fraction of rows whose max-softmax confidence is strictly above the
// threshold.
double AtcPredict(const AtcThreshold& threshold, const FeatureBundle& target);

inline constexpr double kDefaultEpsScale = 1e-6;

// Frechet distance between Gaussians fit to the two full feature matrices.
double FidScore(const FeatureBundle& ref, const FeatureBundle& sample,
                double eps_scale = kDefaultEpsScale);

}  // namespace autoeval

#endif  // AUTOEVAL_SCORES_H_
