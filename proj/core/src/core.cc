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

#include "debiasrec/core.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace debiasrec {

std::optional<std::string> ErrorParams::Violation(double rho01, double rho10) {
  std::ostringstream msg;
  if (!std::isfinite(rho01) || !std::isfinite(rho10)) {
    msg << "rho01 and rho10 must be finite";
    return msg.str();
  }
  if (rho01 < 0.0) {
    msg << "rho01 < 0 (" << rho01 << ")";
    return msg.str();
  }
  if (rho10 < 0.0) {
    msg << "rho10 < 0 (" << rho10 << ")";
    return msg.str();
  }
  if (rho01 + rho10 >= 1.0 - kRhoMargin) {
    msg << "rho01+rho10 >= 1 (" << rho01 << " + " << rho10 << ")";
    return msg.str();
  }
  return std::nullopt;
}

ErrorParams::ErrorParams(double rho01, double rho10)
    : rho01_(rho01), rho10_(rho10) {
  if (auto violation = Violation(rho01, rho10)) {
    throw std::invalid_argument("invalid error rates: " + *violation);
  }
}

ErrorParams ErrorParams::Clamped(double rho01, double rho10, bool* clamped) {
  bool changed = false;
  auto clamp01 = [&changed](double v) {
    if (std::isnan(v)) {
      changed = true;
      return 0.0;
    }
    const double c = std::clamp(v, 0.0, 1.0);
    if (c != v) changed = true;
    return c;
  };
  double a = clamp01(rho01);
  double b = clamp01(rho10);
  if (a + b >= 1.0 - kRhoMargin) {
    const double scale = (1.0 - 2.0 * kRhoMargin) / (a + b);
    a *= scale;
    b *= scale;
    changed = true;
  }
  if (clamped != nullptr) *clamped = changed;
  return ErrorParams(a, b);
}

std::size_t RatingDataset::NumObserved() const {
  std::size_t count = 0;
  for (auto o : observed_mask.flat()) count += (o != 0);
  return count;
}

RatingDataset MakeDataset(std::size_t n_users, std::size_t n_items) {
  RatingDataset d;
  d.n_users = n_users;
  d.n_items = n_items;
  d.observed_mask = BinaryMatrix(n_users, n_items, 0);
  d.observed_ratings = RealMatrix(n_users, n_items, 0.0);
  return d;
}

std::vector<std::string> ValidateDataset(
    const RatingDataset& dataset, const std::optional<RawErrorRates>& rates) {
  std::vector<std::string> out;
  const std::size_t n = dataset.n_users;
  const std::size_t m = dataset.n_items;
  auto shape_ok = [&](const auto& mat, const char* name) {
    if (!mat.SameShape(n, m)) {
      std::ostringstream msg;
      msg << name << " has shape " << mat.rows() << "x" << mat.cols()
          << ", expected " << n << "x" << m;
      out.push_back(msg.str());
      return false;
    }
    return true;
  };
  const bool mask_ok = shape_ok(dataset.observed_mask, "observed_mask");
  const bool ratings_ok =
      shape_ok(dataset.observed_ratings, "observed_ratings");
  if (mask_ok) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto o = dataset.observed_mask(u, i);
        if (o > 1) {
          std::ostringstream msg;
          msg << "observed_mask(" << u << "," << i << ") = " << int{o}
              << " is not binary";
          out.push_back(msg.str());
        }
      }
    }
  }
  if (mask_ok && ratings_ok) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t i = 0; i < m; ++i) {
        if (dataset.observed_mask(u, i) != 1) continue;
        const double r = dataset.observed_ratings(u, i);
        if (r != 0.0 && r != 1.0) {
          std::ostringstream msg;
          msg << "observed rating at (" << u << "," << i << ") = " << r
              << " is not in {0,1}";
          out.push_back(msg.str());
        }
      }
    }
  }
  if (dataset.true_ratings.has_value() &&
      shape_ok(*dataset.true_ratings, "true_ratings")) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t i = 0; i < m; ++i) {
        const double r = (*dataset.true_ratings)(u, i);
        if (r != 0.0 && r != 1.0) {
          std::ostringstream msg;
          msg << "true rating at (" << u << "," << i << ") = " << r
              << " is not in {0,1}";
          out.push_back(msg.str());
        }
      }
    }
  }
  if (rates.has_value()) {
    if (auto violation = ErrorParams::Violation(rates->rho01, rates->rho10)) {
      out.push_back(*violation);
    }
  }
  return out;
}

PropensityMatrix::PropensityMatrix(RealMatrix values, double floor)
    : values_(std::move(values)), floor_(floor) {
  if (!(floor > 0.0 && floor <= 1.0)) {
    throw std::invalid_argument("propensity floor must lie in (0, 1]");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double p = values_[k];
    if (!std::isfinite(p) || p <= 0.0 || p > 1.0) {
      std::ostringstream msg;
      msg << "propensity at flat index " << k << " = " << p
          << " is outside (0, 1]";
      throw std::invalid_argument(msg.str());
    }
    if (p < floor) values_[k] = floor;
  }
}

PropensityMatrix PropensityMatrix::Ones(std::size_t rows, std::size_t cols) {
  return PropensityMatrix(RealMatrix(rows, cols, 1.0));
}

PredictionMatrix::PredictionMatrix(RealMatrix values)
    : values_(std::move(values)) {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double f = values_[k];
    if (!(f > 0.0 && f < 1.0)) {
      std::ostringstream msg;
      msg << "prediction at flat index " << k << " = " << f
          << " is outside (0, 1)";
      throw std::invalid_argument(msg.str());
    }
  }
}

PredictionMatrix PredictionMatrix::Clipped(RealMatrix values) {
  for (auto& f : values.flat()) {
    if (std::isnan(f)) {
      throw std::invalid_argument("prediction is NaN");
    }
    f = std::clamp(f, kOutputEps, 1.0 - kOutputEps);
  }
  return PredictionMatrix(std::move(values));
}

ImputationMatrix::ImputationMatrix(RealMatrix values)
    : values_(std::move(values)) {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      std::ostringstream msg;
      msg << "imputed error at flat index " << k << " is not finite";
      throw std::invalid_argument(msg.str());
    }
  }
}

ImputationMatrix ImputationMatrix::Constant(std::size_t rows, std::size_t cols,
                                            double value) {
  return ImputationMatrix(RealMatrix(rows, cols, value));
}

}  // namespace debiasrec
