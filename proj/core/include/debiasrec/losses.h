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

// Pointwise losses l(f, r) on probability predictions and the noise-corrected
// surrogate loss l~(f, r) whose expectation over the flip process equals the
// loss against the true label.

#ifndef DEBIASREC_LOSSES_H_
#define DEBIASREC_LOSSES_H_

#include <string>

#include "debiasrec/core.h"

namespace debiasrec {

class LossKind {
 public:
  enum class Type { kSquaredError, kCrossEntropyClipped };

  // Squared error, the default.
  LossKind() = default;

  static LossKind SquaredError() { return LossKind(); }
  // Throws std::invalid_argument unless eps_clip is in (0, 0.1].
  static LossKind CrossEntropyClipped(double eps_clip);

  // Parses "squared" / "mse" or "xent[:eps]".
  static LossKind Parse(const std::string& text);
  std::string ToString() const;

  Type type() const { return type_; }
  double eps_clip() const { return eps_clip_; }

 private:
  Type type_ = Type::kSquaredError;
  double eps_clip_ = 0.0;
};

// l(pred, label). pred must lie in (0, 1) (std::domain_error otherwise);
// label is 0 or 1.
double PointLoss(const LossKind& kind, double pred, int label);

// d l(pred, label) / d pred. Zero where clipping is active.
double PointLossGrad(const LossKind& kind, double pred, int label);

// Both surrogate branches at one prediction:
//   l~(f, 1) = [(1 - rho10) l(f, 1) - rho01 l(f, 0)] / (1 - rho01 - rho10)
//   l~(f, 0) = [(1 - rho01) l(f, 0) - rho10 l(f, 1)] / (1 - rho01 - rho10)
struct SurrogatePair {
  double positive = 0.0;  // l~(f, 1)
  double negative = 0.0;  // l~(f, 0)
};
SurrogatePair SurrogateFromLosses(double loss_pos, double loss_neg,
                                  const ErrorParams& rho);

// l~(pred, observed_label). May be negative; never clamped.
double SurrogateLoss(const LossKind& kind, double pred, int observed_label,
                     const ErrorParams& rho);

// d l~(pred, observed_label) / d pred.
double SurrogateLossGrad(const LossKind& kind, double pred, int observed_label,
                         const ErrorParams& rho);

}  // namespace debiasrec

#endif  // DEBIASREC_LOSSES_H_
