/*
 * Copyright 2026 The debiasrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DEBIASREC_RNG_H_
#define DEBIASREC_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace debiasrec {

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the distributions below are implemented here
// rather than with <random>'s distribution classes, whose outputs differ
// between standard library implementations.
//
// An Rng has a single owner and is passed explicitly to every stochastic
// operation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) = default;
  Rng& operator=(Rng&&) = default;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t UniformIndex(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via the Marsaglia polar method.
  double Normal();

  double Normal(double mean, double stddev) {
    return mean + stddev * Normal();
  }

  // Derives an independent child stream; used to give sub-tasks their own
  // generator without sharing state.
  Rng Fork() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates shuffle driven by `rng`.
template <typename T>
void Shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t k = values.size(); k > 1; --k) {
    std::swap(values[k - 1], values[rng.UniformIndex(k)]);
  }
}

}  // namespace debiasrec

#endif  // DEBIASREC_RNG_H_
