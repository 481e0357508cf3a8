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

#include "debiasrec/noise.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace debiasrec {

NoisyRateModel::NoisyRateModel(RealMatrix q) : q_(std::move(q)) {
  for (std::size_t k = 0; k < q_.size(); ++k) {
    if (!(q_[k] > 0.0 && q_[k] < 1.0)) {
      std::ostringstream msg;
      msg << "noisy rate at flat index " << k << " = " << q_[k]
          << " is outside (0, 1)";
      throw std::invalid_argument(msg.str());
    }
  }
}

std::size_t RecommendedKExtreme(std::size_t n_users, std::size_t n_items) {
  const double k = std::ceil(0.001 * static_cast<double>(n_users * n_items));
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

ExtremeSets FindExtremeSets(const RealMatrix& values, std::size_t k) {
  const std::size_t n = values.size();
  if (k < 1 || 2 * k > n) {
    std::ostringstream msg;
    msg << "k_extreme must be in [1, " << n / 2 << "], got " << k;
    throw std::invalid_argument(msg.str());
  }
  const auto& v = values.values();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  ExtremeSets out;
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return v[a] < v[b] || (v[a] == v[b] && a < b);
                    });
  out.lowest.assign(order.begin(), order.begin() + k);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return v[a] > v[b] || (v[a] == v[b] && a < b);
                    });
  out.highest.assign(order.begin(), order.begin() + k);
  return out;
}

IdentifiedRates IdentifyErrorParams(const NoisyRateModel& q,
                                    std::size_t k_extreme) {
  return RatesAtExtremes(q, q.q(), k_extreme);
}

IdentifiedRates RatesAtExtremes(const NoisyRateModel& q,
                                const RealMatrix& ranking, std::size_t k) {
  if (!ranking.SameShape(q.q())) {
    throw std::invalid_argument("ranking matrix does not match q");
  }
  const ExtremeSets sets = FindExtremeSets(ranking, k);
  double low_sum = 0.0;
  for (std::size_t idx : sets.lowest) low_sum += q.q()[idx];
  double high_sum = 0.0;
  for (std::size_t idx : sets.highest) high_sum += q.q()[idx];
  const double kk = static_cast<double>(k);
  IdentifiedRates out;
  out.rates = ErrorParams::Clamped(1.0 - high_sum / kk, low_sum / kk,
                                   &out.clamped);
  const auto& v = ranking.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  out.no_separation = *lo == *hi;
  return out;
}

ExtremePairs FindExtremePairs(const RealMatrix& values) {
  if (values.empty()) throw std::invalid_argument("empty matrix");
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] < values[lo]) lo = k;
    if (values[k] > values[hi]) hi = k;
  }
  const std::size_t cols = values.cols();
  return {{lo / cols, lo % cols}, {hi / cols, hi % cols}};
}

ExtremePairs FindExtremePairs(const PredictionMatrix& predictions) {
  return FindExtremePairs(predictions.values());
}

IdentifiedRates RatesAtExtremePairs(const NoisyRateModel& q,
                                    const ExtremePairs& pairs) {
  IdentifiedRates out;
  const double at_max = q(pairs.argmax.user, pairs.argmax.item);
  const double at_min = q(pairs.argmin.user, pairs.argmin.item);
  out.rates = ErrorParams::Clamped(1.0 - at_max, at_min, &out.clamped);
  out.no_separation = at_max == at_min;
  return out;
}

}  // namespace debiasrec
