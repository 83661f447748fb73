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

#ifndef AUTOEVAL_RANDOM_H_
#define AUTOEVAL_RANDOM_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace autoeval {

// Seeded generator whose draws depend only on the seed, not on the standard
// library's distribution implementations, so seeded runs are reproducible
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform();
  // Uniform integer in [0, n).
  std::uint64_t UniformIndex(std::uint64_t n);
  double Normal();
  // Index drawn with probability proportional to weights[i]; all-zero weights
  // fall back to a uniform draw.
  std::size_t Categorical(std::span<const double> weights);
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[UniformIndex(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t MixSeed(std::uint64_t base, std::uint64_t stream);

}  // namespace autoeval

#endif  // AUTOEVAL_RANDOM_H_
