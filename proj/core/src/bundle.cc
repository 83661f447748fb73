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

#include "autoeval/bundle.h"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "autoeval/error.h"

namespace autoeval {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::array<char, 4> kFeaturesMagic = {'F', 'B', '0', '1'};
constexpr std::array<char, 4> kLogitsMagic = {'L', 'G', '0', '1'};
constexpr std::array<char, 4> kLabelsMagic = {'L', 'B', '0', '1'};

constexpr double kAccuracyTolerance = 1e-12;

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

std::uint32_t GetU32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i]))
         << (8 * i);
  }
  return v;
}

std::string EncodeMatrix(const std::array<char, 4>& magic,
                         const FloatMatrix& m) {
  std::string out(magic.begin(), magic.end());
  PutU32(out, static_cast<std::uint32_t>(m.rows()));
  PutU32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + 4 * static_cast<std::size_t>(m.size()));
  // Row-major storage matches the on-disk order.
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    PutU32(out, std::bit_cast<std::uint32_t>(m.data()[i]));
  }
  return out;
}

std::string EncodeLabels(const std::vector<std::uint32_t>& labels) {
  std::string out(kLabelsMagic.begin(), kLabelsMagic.end());
  PutU32(out, static_cast<std::uint32_t>(labels.size()));
  for (std::uint32_t label : labels) PutU32(out, label);
  return out;
}

void WriteFile(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "missing file " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void CheckMagic(const std::string& bytes, const std::array<char, 4>& magic,
                const fs::path& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic, path.string());
  }
}

FloatMatrix DecodeMatrix(const std::string& bytes,
                         const std::array<char, 4>& magic,
                         const fs::path& path) {
  CheckMagic(bytes, magic, path);
  if (bytes.size() < 12) {
    throw Error(ErrorCode::kPayloadShape, "truncated header in " + path.string());
  }
  const std::uint64_t rows = GetU32(bytes, 4);
  const std::uint64_t cols = GetU32(bytes, 8);
  if (bytes.size() != 12 + 4 * rows * cols) {
    throw Error(ErrorCode::kPayloadShape,
                "payload size disagrees with header in " + path.string());
  }
  FloatMatrix m(static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = std::bit_cast<float>(GetU32(bytes, 12 + 4 * i));
  }
  return m;
}

std::vector<std::uint32_t> DecodeLabels(const std::string& bytes,
                                        const fs::path& path) {
  CheckMagic(bytes, kLabelsMagic, path);
  if (bytes.size() < 8) {
    throw Error(ErrorCode::kPayloadShape, "truncated header in " + path.string());
  }
  const std::uint64_t n = GetU32(bytes, 4);
  if (bytes.size() != 8 + 4 * n) {
    throw Error(ErrorCode::kPayloadShape,
                "payload size disagrees with header in " + path.string());
  }
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = GetU32(bytes, 8 + 4 * i);
  return labels;
}

bool BitEqual(const FloatMatrix& a, const FloatMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

bool AllFinite(const FloatMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) return false;
  }
  return true;
}

json ManifestToJson(const BundleManifest& m) {
  json j;
  j["id"] = m.id;
  j["n"] = m.n;
  j["d"] = m.d;
  j["C"] = m.num_classes;
  j["has_logits"] = m.has_logits;
  j["has_labels"] = m.has_labels;
  j["accuracy"] = m.accuracy ? json(*m.accuracy) : json(nullptr);
  j["model_ref"] = m.model_ref;
  j["source"] = std::string(BundleSourceName(m.source));
  j["format_version"] = m.format_version;
  return j;
}

BundleManifest ManifestFromJson(const json& j) {
  BundleManifest m;
  m.id = j.at("id").get<std::string>();
  m.n = j.at("n").get<std::uint32_t>();
  m.d = j.at("d").get<std::uint32_t>();
  m.num_classes = j.at("C").get<std::uint32_t>();
  m.has_logits = j.at("has_logits").get<bool>();
  m.has_labels = j.at("has_labels").get<bool>();
  if (j.contains("accuracy") && !j.at("accuracy").is_null()) {
    m.accuracy = j.at("accuracy").get<double>();
  }
  m.model_ref = j.value("model_ref", std::string());
  m.source = ParseBundleSource(j.value("source", std::string("unknown")));
  m.format_version = j.value("format_version", kBundleFormatVersion);
  return m;
}

}  // namespace

std::string_view BundleSourceName(BundleSource source) {
  switch (source) {
    case BundleSource::kSynthetic:
      return "synthetic";
    case BundleSource::kExported:
      return "exported";
    case BundleSource::kUnknown:
      return "unknown";
  }
  return "unknown";
}

BundleSource ParseBundleSource(std::string_view name) {
  if (name == "synthetic") return BundleSource::kSynthetic;
  if (name == "exported") return BundleSource::kExported;
  return BundleSource::kUnknown;
}

Eigen::MatrixXd FeatureBundle::FeaturesAsDouble() const {
  return features.cast<double>();
}

Eigen::MatrixXd FeatureBundle::LogitsAsDouble() const {
  if (!logits) throw Error(ErrorCode::kMissingData, "bundle has no logits");
  return logits->cast<double>();
}

bool operator==(const FeatureBundle& a, const FeatureBundle& b) {
  if (a.id != b.id || a.num_classes != b.num_classes ||
      a.model_ref != b.model_ref || a.source != b.source ||
      a.accuracy != b.accuracy || a.labels != b.labels ||
      a.logits.has_value() != b.logits.has_value()) {
    return false;
  }
  if (!BitEqual(a.features, b.features)) return false;
  return !a.logits || BitEqual(*a.logits, *b.logits);
}

double ArgmaxAgreement(const FloatMatrix& logits,
                       std::span<const std::uint32_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size() ||
      labels.empty()) {
    throw Error(ErrorCode::kPayloadShape, "logits rows must equal label count");
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    if (static_cast<std::uint32_t>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void ValidateBundle(const FeatureBundle& b) {
  const Eigen::Index n = b.features.rows();
  if (n < 1 || b.features.cols() < 1) {
    throw Error(ErrorCode::kPayloadShape,
                "bundle '" + b.id + "' needs n >= 1 and d >= 1");
  }
  if (!AllFinite(b.features)) {
    throw Error(ErrorCode::kNonFinite, "features of '" + b.id + "'");
  }
  if (b.num_classes < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative class count");
  }
  if (b.logits) {
    if (b.logits->rows() != n) {
      throw Error(ErrorCode::kPayloadShape,
                  "logits rows differ from feature rows in '" + b.id + "'");
    }
    if (b.logits->cols() != b.num_classes || b.num_classes < 1) {
      throw Error(ErrorCode::kPayloadShape,
                  "logits columns differ from class count in '" + b.id + "'");
    }
    if (!AllFinite(*b.logits)) {
      throw Error(ErrorCode::kNonFinite, "logits of '" + b.id + "'");
    }
  }
  if (b.labels) {
    if (static_cast<Eigen::Index>(b.labels->size()) != n) {
      throw Error(ErrorCode::kPayloadShape,
                  "label count differs from feature rows in '" + b.id + "'");
    }
    if (b.num_classes < 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "labels require a class count in '" + b.id + "'");
    }
    for (std::uint32_t label : *b.labels) {
      if (label >= static_cast<std::uint32_t>(b.num_classes)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "label out of range in '" + b.id + "'");
      }
    }
  }
  if (b.accuracy) {
    const double acc = *b.accuracy;
    if (!(acc >= 0.0 && acc <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "accuracy outside [0,1] in '" + b.id + "'");
    }
    if (b.logits && b.labels) {
      const double agreement = ArgmaxAgreement(*b.logits, *b.labels);
      if (std::abs(agreement - acc) > kAccuracyTolerance) {
        throw Error(ErrorCode::kInconsistentAccuracy,
                    "'" + b.id + "' stores " + std::to_string(acc) +
                        " but logits/labels give " + std::to_string(agreement));
      }
    }
  }
}

BundleManifest ManifestOf(const FeatureBundle& b) {
  BundleManifest m;
  m.id = b.id;
  m.n = static_cast<std::uint32_t>(b.features.rows());
  m.d = static_cast<std::uint32_t>(b.features.cols());
  m.num_classes = static_cast<std::uint32_t>(b.num_classes);
  m.has_logits = b.logits.has_value();
  m.has_labels = b.labels.has_value();
  m.accuracy = b.accuracy;
  m.model_ref = b.model_ref;
  m.source = b.source;
  return m;
}

void WriteBundle(const FeatureBundle& bundle, const fs::path& dir) {
  ValidateBundle(bundle);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());

  WriteFile(dir / "features.bin", EncodeMatrix(kFeaturesMagic, bundle.features));
  if (bundle.logits) {
    WriteFile(dir / "logits.bin", EncodeMatrix(kLogitsMagic, *bundle.logits));
  } else {
    fs::remove(dir / "logits.bin", ec);
  }
  if (bundle.labels) {
    WriteFile(dir / "labels.bin", EncodeLabels(*bundle.labels));
  } else {
    fs::remove(dir / "labels.bin", ec);
  }
  // The manifest goes last so a reader never sees it ahead of its payloads.
  WriteFile(dir / "manifest.json", ManifestToJson(ManifestOf(bundle)).dump(2) + "\n");
}

BundleManifest ReadManifest(const fs::path& dir) {
  const std::string text = ReadFile(dir / "manifest.json");
  try {
    return ManifestFromJson(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                "malformed manifest in " + dir.string() + ": " + e.what());
  }
}

FeatureBundle ReadBundle(const fs::path& dir) {
  const BundleManifest m = ReadManifest(dir);
  if (m.format_version != kBundleFormatVersion) {
    throw Error(ErrorCode::kInvalidArgument,
                "unsupported format_version " + std::to_string(m.format_version));
  }

  FeatureBundle b;
  b.id = m.id;
  b.num_classes = static_cast<int>(m.num_classes);
  b.model_ref = m.model_ref;
  b.source = m.source;
  b.accuracy = m.accuracy;

  const fs::path features_path = dir / "features.bin";
  b.features = DecodeMatrix(ReadFile(features_path), kFeaturesMagic,
                            features_path);
  if (b.features.rows() != m.n || b.features.cols() != m.d) {
    throw Error(ErrorCode::kPayloadShape,
                "manifest n/d disagree with " + features_path.string());
  }
  if (m.has_logits) {
    const fs::path path = dir / "logits.bin";
    FloatMatrix logits = DecodeMatrix(ReadFile(path), kLogitsMagic, path);
    if (logits.rows() != m.n || logits.cols() != m.num_classes) {
      throw Error(ErrorCode::kPayloadShape,
                  "manifest n/C disagree with " + path.string());
    }
    b.logits = std::move(logits);
  }
  if (m.has_labels) {
    const fs::path path = dir / "labels.bin";
    std::vector<std::uint32_t> labels = DecodeLabels(ReadFile(path), path);
    if (labels.size() != m.n) {
      throw Error(ErrorCode::kPayloadShape,
                  "manifest n disagrees with " + path.string());
    }
    b.labels = std::move(labels);
  }
  ValidateBundle(b);
  return b;
}

bool IsBundleDir(const fs::path& dir) {
  std::error_code ec;
  return fs::is_regular_file(dir / "manifest.json", ec);
}

}  // namespace autoeval
