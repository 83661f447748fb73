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

#ifndef AUTOEVAL_BUNDLE_H_
#define AUTOEVAL_BUNDLE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace autoeval {

// Payloads are held at storage precision so that a bundle read from disk and
// written back is bit-identical. Numerical code converts to double.
using FloatMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class BundleSource { kSynthetic, kExported, kUnknown };

std::string_view BundleSourceName(BundleSource source);
BundleSource ParseBundleSource(std::string_view name);

inline constexpr int kBundleFormatVersion = 1;

// One dataset as seen through a fixed classifier: its embedding matrix
// (n x d), optionally the classifier's logits (n x C), ground-truth labels
// and the known accuracy as a fraction in [0, 1].
struct FeatureBundle {
  std::string id;
  FloatMatrix features;
  std::optional<FloatMatrix> logits;
  std::optional<std::vector<std::uint32_t>> labels;
  std::optional<double> accuracy;
  // Class count C. Equal to logits.cols() when logits are present; 0 means
  // unknown and is only allowed when neither logits nor labels exist.
  int num_classes = 0;
  std::string model_ref;
  BundleSource source = BundleSource::kUnknown;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Eigen::MatrixXd FeaturesAsDouble() const;
  Eigen::MatrixXd LogitsAsDouble() const;

  friend bool operator==(const FeatureBundle& a, const FeatureBundle& b);
};

struct BundleManifest {
  std::string id;
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::uint32_t num_classes = 0;
  bool has_logits = false;
  bool has_labels = false;
  std::optional<double> accuracy;
  std::string model_ref;
  BundleSource source = BundleSource::kUnknown;
  int format_version = kBundleFormatVersion;
};

// Fraction of rows whose argmax logit equals the label. Ties in the argmax
// resolve to the lowest class index.
double ArgmaxAgreement(const FloatMatrix& logits,
                       std::span<const std::uint32_t> labels);

// Throws autoeval::Error on the first violated invariant.
void ValidateBundle(const FeatureBundle& bundle);

BundleManifest ManifestOf(const FeatureBundle& bundle);

// Writes manifest.json, features.bin and, when present, logits.bin and
// labels.bin. The bundle is validated before anything touches the disk.
void WriteBundle(const FeatureBundle& bundle, const std::filesystem::path& dir);

BundleManifest ReadManifest(const std::filesystem::path& dir);
FeatureBundle ReadBundle(const std::filesystem::path& dir);

// True when `dir` holds a manifest.json.
bool IsBundleDir(const std::filesystem::path& dir);

}  // namespace autoeval

#endif  // AUTOEVAL_BUNDLE_H_
