// Copyright 2026 The Fedsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSIM_RNG_H_
#define FEDSIM_RNG_H_

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fedsim {

// Mixes a 64-bit value with the splitmix64 finalizer.
uint64_t SplitMix64(uint64_t x);

// Seeded random stream used everywhere randomness is needed.
//
// All derived quantities (uniform doubles, Gaussians, bounded integers) are
// computed by this class from raw 64-bit engine output rather than through
// <random> distributions, whose algorithms are implementation-defined. This
// keeps a (seed, call sequence) pair reproducible across standard libraries.
//
// Independent sub-streams are obtained with Fork(), which depends only on the
// construction seed and the stream key, never on how much of this stream has
// been consumed. That lets per-device streams stay stable when the order of
// simulation work changes.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t seed() const { return seed_; }

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform();
  double UniformIn(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via the polar Box-Muller method.
  double Gaussian();
  double Gaussian(double mean, double stddev) {
    return mean + stddev * Gaussian();
  }

  Rng Fork(uint64_t stream) const;

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedsim

#endif  // FEDSIM_RNG_H_
