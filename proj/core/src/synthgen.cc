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

#include "autoeval/synthgen.h"

#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "autoeval/error.h"
#include "autoeval/random.h"

namespace autoeval {
namespace {

Eigen::MatrixXd RandomOrthogonal(int d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.Normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

std::string FormatId(const std::string& prefix, std::size_t index, double sigma,
                     double shift, double prior) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s%05zu_s%g_m%g_p%g", prefix.c_str(), index, sigma,
                shift, prior);
  return buf;
}

}  // namespace

SynthWorld GenWorld(int num_classes, int dim, double separation,
                    std::uint64_t seed, double class_cov_scale) {
  if (num_classes < 2 || dim < 1 || dim < num_classes - 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "world needs C >= 2 and d >= C - 1 (C=" + std::to_string(num_classes) +
                    ", d=" + std::to_string(dim) + ")");
  }
  if (!(separation > 0.0) || !(class_cov_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "separation and cov scale must be > 0");
  }
  const int c = num_classes;
  // Helmert coordinates of the standard basis vectors: an orthonormal frame of
  // the hyperplane sum(x) = 0, where the centered vertices live.
  Eigen::MatrixXd simplex = Eigen::MatrixXd::Zero(c, dim);
  for (int k = 1; k < c; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) simplex(i, k - 1) = scale;
    simplex(k, k - 1) = -static_cast<double>(k) * scale;
  }
  // Unit vertices are sqrt(2) apart.
  simplex *= separation / std::sqrt(2.0);

  Rng rng(seed);
  SynthWorld world;
  world.num_classes = c;
  world.dim = dim;
  world.class_cov_scale = class_cov_scale;
  world.seed = seed;
  world.class_means = simplex * RandomOrthogonal(dim, rng).transpose();
  return world;
}

std::vector<double> SkewedPrior(int num_classes, double strength,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> prior(num_classes);
  double total = 0.0;
  for (auto& p : prior) {
    p = std::exp(strength * rng.Normal());
    total += p;
  }
  for (auto& p : prior) p /= total;
  return prior;
}

Eigen::VectorXd RandomDirection(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v(i) = rng.Normal();
  } while (v.norm() == 0.0);
  return v.normalized();
}

FeatureBundle GenShiftedBundle(const SynthWorld& world, const ShiftSpec& spec,
                               const std::string& id) {
  const int c = world.num_classes;
  const int d = world.dim;
  if (spec.n < 1) throw Error(ErrorCode::kInvalidArgument, "shift spec needs n >= 1");
  if (!(spec.noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  }
  if (spec.mean_shift.size() != 0 && spec.mean_shift.size() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "mean_shift length must equal d");
  }
  std::vector<double> prior = spec.class_prior;
  if (prior.empty()) prior.assign(c, 1.0 / c);
  if (static_cast<int>(prior.size()) != c) {
    throw Error(ErrorCode::kDimensionMismatch, "class_prior length must equal C");
  }
  double total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative class prior");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "class prior must sum to 1");
  }

  Rng rng(spec.seed);
  FeatureBundle b;
  b.id = id;
  b.num_classes = c;
  b.source = BundleSource::kSynthetic;
  b.model_ref = "nearest-mean:world-" + std::to_string(world.seed);
  b.features.resize(spec.n, d);
  FloatMatrix logits(spec.n, c);
  std::vector<std::uint32_t> labels(spec.n);
  Eigen::VectorXd x(d);
  for (int i = 0; i < spec.n; ++i) {
    const auto label = static_cast<std::uint32_t>(rng.Categorical(prior));
    labels[i] = label;
    for (int j = 0; j < d; ++j) {
      // Both draws happen for every sigma so that runs differing only in
      // sigma share their class samples.
      const double base = world.class_cov_scale * rng.Normal();
      const double noise = rng.Normal();
      x(j) = world.class_means(label, j) + base + spec.noise_sigma * noise;
    }
    if (spec.mean_shift.size() == d) x += spec.mean_shift;
    for (int j = 0; j < d; ++j) b.features(i, j) = static_cast<float>(x(j));
    for (int k = 0; k < c; ++k) {
      double dist = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = static_cast<double>(b.features(i, j)) - world.class_means(k, j);
        dist += diff * diff;
      }
      logits(i, k) = static_cast<float>(-world.logit_scale * std::sqrt(dist));
    }
  }
  b.logits = std::move(logits);
  b.labels = std::move(labels);
  b.accuracy = ArgmaxAgreement(*b.logits, *b.labels);
  return b;
}

SynthWorld MakeWorld(const WorldConfig& config) {
  SynthWorld world = GenWorld(config.num_classes, config.dim, config.separation,
                              config.seed, config.class_cov_scale);
  if (!(config.logit_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "logit_scale must be > 0");
  }
  world.logit_scale = config.logit_scale;
  return world;
}

double OracleAccuracy(const FeatureBundle& bundle) {
  if (!bundle.logits || !bundle.labels) {
    throw Error(ErrorCode::kMissingData,
                "oracle accuracy needs logits and labels ('" + bundle.id + "')");
  }
  return ArgmaxAgreement(*bundle.logits, *bundle.labels);
}

std::vector<GridPoint> ExpandGrid(const SynthWorld& world, const ShiftGrid& grid) {
  if (grid.n < 1 || grid.replicates < 1) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs n >= 1 and replicates >= 1");
  }
  std::vector<GridPoint> points;
  std::size_t index = 0;
  for (double sigma : grid.sigmas) {
    for (double norm : grid.shift_norms) {
      for (double strength : grid.prior_strengths) {
        for (int r = 0; r < grid.replicates; ++r, ++index) {
          GridPoint p;
          const std::uint64_t seed = MixSeed(grid.base_seed, index);
          p.id = FormatId(grid.id_prefix, index, sigma, norm, strength);
          p.spec.noise_sigma = sigma;
          p.spec.mean_shift = norm * RandomDirection(world.dim, MixSeed(seed, 1));
          p.spec.class_prior = SkewedPrior(world.num_classes, strength, MixSeed(seed, 2));
          p.spec.n = grid.n;
          p.spec.seed = seed;
          points.push_back(std::move(p));
        }
      }
    }
  }
  return points;
}

ShiftGrid ParseShiftGrid(const std::string& json_text) {
  using json = nlohmann::json;
  ShiftGrid grid;
  try {
    const json j = json::parse(json_text);
    if (j.contains("world")) {
      const json& w = j.at("world");
      grid.world.num_classes = w.value("C", grid.world.num_classes);
      grid.world.dim = w.value("d", grid.world.dim);
      grid.world.separation = w.value("separation", grid.world.separation);
      grid.world.class_cov_scale = w.value("cov_scale", grid.world.class_cov_scale);
      grid.world.logit_scale = w.value("logit_scale", grid.world.logit_scale);
      grid.world.seed = w.value("seed", grid.world.seed);
    }
    grid.sigmas = j.value("sigmas", grid.sigmas);
    grid.shift_norms = j.value("shift_norms", grid.shift_norms);
    grid.prior_strengths = j.value("prior_temperatures", grid.prior_strengths);
    grid.n = j.value("n", grid.n);
    grid.replicates = j.value("replicates", grid.replicates);
    grid.base_seed = j.value("base_seed", grid.base_seed);
    grid.id_prefix = j.value("id_prefix", grid.id_prefix);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed grid: ") + e.what());
  }
  if (grid.sigmas.empty() || grid.shift_norms.empty() || grid.prior_strengths.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "grid axes must be non-empty");
  }
  return grid;
}

}  // namespace autoeval
