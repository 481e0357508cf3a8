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

// Identification of the flip rates (rho01, rho10) under weak separability.
//
// The noisy positive rate is an increasing affine map of the true one,
//   P(r = 1 | x) = (1 - rho01 - rho10) P(r* = 1 | x) + rho10,
// so where the true rate reaches 1 the noisy rate equals 1 - rho01, and where
// it reaches 0 the noisy rate equals rho10.

#ifndef DEBIASREC_NOISE_H_
#define DEBIASREC_NOISE_H_

#include <cstddef>
#include <utility>
#include <vector>

#include "debiasrec/core.h"

namespace debiasrec {

// q_{u,i}: an estimate of P(r_{u,i} = 1 | x_{u,i}) over D, entries in (0, 1).
class NoisyRateModel {
 public:
  NoisyRateModel() = default;
  // Throws std::invalid_argument unless every entry is in (0, 1).
  explicit NoisyRateModel(RealMatrix q);

  const RealMatrix& q() const { return q_; }
  double operator()(std::size_t u, std::size_t i) const { return q_(u, i); }
  std::size_t rows() const { return q_.rows(); }
  std::size_t cols() const { return q_.cols(); }

 private:
  RealMatrix q_;
};

struct IdentifiedRates {
  ErrorParams rates;
  // The raw estimates had to be projected into the valid region.
  bool clamped = false;
  // The ranking matrix has no separation (all entries equal).
  bool no_separation = false;
};

// k = max(1, ceil(0.001 * N * M)): averaging over a few extremes is less
// sensitive to estimation noise in q than the single argmin/argmax.
std::size_t RecommendedKExtreme(std::size_t n_users, std::size_t n_items);

// rho01 = 1 - mean of the k largest entries of q, rho10 = mean of the k
// smallest; ties resolved by smallest row-major index. Requires
// 1 <= k <= N*M/2 (std::invalid_argument otherwise).
IdentifiedRates IdentifyErrorParams(const NoisyRateModel& q,
                                    std::size_t k_extreme = 1);

struct ExtremePairs {
  PairIndex argmin;
  PairIndex argmax;
};

// Row-major-first argmin and argmax of a prediction (or any) matrix.
ExtremePairs FindExtremePairs(const RealMatrix& values);
ExtremePairs FindExtremePairs(const PredictionMatrix& predictions);

// Reads the noisy rate model at extreme pairs found on another model:
// rho01 = 1 - q(argmax), rho10 = q(argmin), projected into the valid region.
IdentifiedRates RatesAtExtremePairs(const NoisyRateModel& q,
                                    const ExtremePairs& pairs);

// Flat row-major indices of the k smallest and k largest entries of
// `values`, ties resolved by smallest index. Requires 1 <= k <= size / 2.
struct ExtremeSets {
  std::vector<std::size_t> lowest;
  std::vector<std::size_t> highest;
};
ExtremeSets FindExtremeSets(const RealMatrix& values, std::size_t k);

// Generalizes RatesAtExtremePairs to k pairs per side: rho01 = 1 - mean of q
// over the k highest entries of `ranking`, rho10 = mean of q over the k
// lowest. With k = 1 this matches RatesAtExtremePairs(FindExtremePairs(..)).
IdentifiedRates RatesAtExtremes(const NoisyRateModel& q,
                                const RealMatrix& ranking, std::size_t k);

}  // namespace debiasrec

#endif  // DEBIASREC_NOISE_H_
