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

// Shared data model: rating datasets, error rates and the per-pair matrices
// consumed by the estimators.

#ifndef DEBIASREC_CORE_H_
#define DEBIASREC_CORE_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "debiasrec/matrix.h"

namespace debiasrec {

// Margin on rho01 + rho10 < 1; keeps 1 / (1 - rho01 - rho10) bounded.
inline constexpr double kRhoMargin = 1e-6;

// Clipping floor applied to propensities when none is configured.
inline constexpr double kDefaultPropensityFloor = 0.05;

// Prediction outputs are kept inside [kOutputEps, 1 - kOutputEps].
inline constexpr double kOutputEps = 1e-6;

// Class-conditional flip rates of the observed feedback:
//   rho01 = P(r = 0 | r* = 1)   (false negative rate)
//   rho10 = P(r = 1 | r* = 0)   (false positive rate)
// Valid iff both are non-negative and rho01 + rho10 < 1 - kRhoMargin.
class ErrorParams {
 public:
  // Noise-free rates (0, 0).
  ErrorParams() = default;

  // Throws std::invalid_argument when the pair is invalid.
  ErrorParams(double rho01, double rho10);

  // Projects an arbitrary pair into the valid region: each rate is clamped to
  // [0, 1] and, if the sum is too large, both are scaled down proportionally
  // so that the sum equals 1 - 2 * kRhoMargin. `clamped` (optional) reports
  // whether any adjustment happened.
  static ErrorParams Clamped(double rho01, double rho10,
                             bool* clamped = nullptr);

  // Describes why (rho01, rho10) is invalid, or returns nullopt.
  static std::optional<std::string> Violation(double rho01, double rho10);

  double rho01() const { return rho01_; }
  double rho10() const { return rho10_; }
  // 1 - rho01 - rho10, strictly positive.
  double denominator() const { return 1.0 - rho01_ - rho10_; }

  friend bool operator==(const ErrorParams&, const ErrorParams&) = default;

 private:
  double rho01_ = 0.0;
  double rho10_ = 0.0;
};

// Observed binary feedback over the N x M user-item universe. Ratings are
// stored as reals so that malformed inputs can be diagnosed by
// ValidateDataset; valid datasets only hold 0/1 values.
struct RatingDataset {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  BinaryMatrix observed_mask;         // o_{u,i}
  RealMatrix observed_ratings;        // r_{u,i}, meaningful where o = 1
  std::optional<RealMatrix> true_ratings;  // r*_{u,i}, synthetic data only

  std::size_t num_pairs() const { return n_users * n_items; }
  std::size_t NumObserved() const;
  bool observed(std::size_t u, std::size_t i) const {
    return observed_mask(u, i) != 0;
  }
};

// Creates an empty dataset of the given shape (nothing observed).
RatingDataset MakeDataset(std::size_t n_users, std::size_t n_items);

// Raw (unvalidated) error rates, e.g. as read from a configuration file.
struct RawErrorRates {
  double rho01 = 0.0;
  double rho10 = 0.0;
};

// Lists every invariant violation of `dataset` (and of `rates`, if given).
// An empty result means the inputs are well formed.
std::vector<std::string> ValidateDataset(
    const RatingDataset& dataset,
    const std::optional<RawErrorRates>& rates = std::nullopt);

// p_hat_{u,i}; every entry lies in [floor, 1].
class PropensityMatrix {
 public:
  PropensityMatrix() = default;

  // Entries below `floor` are raised to it. Throws std::invalid_argument on
  // entries that are not finite, <= 0 or > 1, or on a floor outside (0, 1].
  explicit PropensityMatrix(RealMatrix values,
                            double floor = kDefaultPropensityFloor);

  // All-ones propensities of the given shape.
  static PropensityMatrix Ones(std::size_t rows, std::size_t cols);

  const RealMatrix& values() const { return values_; }
  double operator()(std::size_t u, std::size_t i) const {
    return values_(u, i);
  }
  double floor() const { return floor_; }
  std::size_t rows() const { return values_.rows(); }
  std::size_t cols() const { return values_.cols(); }

 private:
  RealMatrix values_;
  double floor_ = kDefaultPropensityFloor;
};

// f_theta(x_{u,i}); every entry lies strictly inside (0, 1).
class PredictionMatrix {
 public:
  PredictionMatrix() = default;

  // Throws std::invalid_argument unless every entry is in (0, 1).
  explicit PredictionMatrix(RealMatrix values);

  // Clips every entry to [kOutputEps, 1 - kOutputEps] instead of rejecting.
  static PredictionMatrix Clipped(RealMatrix values);

  const RealMatrix& values() const { return values_; }
  double operator()(std::size_t u, std::size_t i) const {
    return values_(u, i);
  }
  std::size_t rows() const { return values_.rows(); }
  std::size_t cols() const { return values_.cols(); }

 private:
  RealMatrix values_;
};

// Imputed (surrogate) errors e_bar_{u,i}; real valued and possibly negative.
class ImputationMatrix {
 public:
  ImputationMatrix() = default;

  // Throws std::invalid_argument on non-finite entries.
  explicit ImputationMatrix(RealMatrix values);

  static ImputationMatrix Constant(std::size_t rows, std::size_t cols,
                                   double value);

  const RealMatrix& values() const { return values_; }
  double operator()(std::size_t u, std::size_t i) const {
    return values_(u, i);
  }
  std::size_t rows() const { return values_.rows(); }
  std::size_t cols() const { return values_.cols(); }

 private:
  RealMatrix values_;
};

}  // namespace debiasrec

#endif  // DEBIASREC_CORE_H_
