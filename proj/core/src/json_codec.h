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

#ifndef AUTOEVAL_SRC_JSON_CODEC_H_
#define AUTOEVAL_SRC_JSON_CODEC_H_

#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "autoeval/regress.h"

namespace autoeval::internal {

using json = nlohmann::json;

// 17 significant digits: enough to reproduce any double exactly.
std::string Decimal(double v);
double ParseDecimal(const json& j);

json EncodeVector(const Eigen::VectorXd& v);
Eigen::VectorXd DecodeVector(const json& j);
json EncodeMatrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd DecodeMatrix(const json& j);
json EncodeDoubles(const std::vector<double>& v);
std::vector<double> DecodeDoubles(const json& j);

json RegressorToJson(const AnyRegressor& reg);
AnyRegressor RegressorFromJson(const json& j);

}  // namespace autoeval::internal

#endif  // AUTOEVAL_SRC_JSON_CODEC_H_
