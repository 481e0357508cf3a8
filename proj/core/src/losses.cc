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

#include "debiasrec/losses.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace debiasrec {
namespace {

void CheckPrediction(double pred) {
  if (!(pred > 0.0 && pred < 1.0)) {
    std::ostringstream msg;
    msg << "prediction " << pred << " is outside (0, 1)";
    throw std::domain_error(msg.str());
  }
}

}  // namespace

LossKind LossKind::CrossEntropyClipped(double eps_clip) {
  if (!(eps_clip > 0.0 && eps_clip <= 0.1)) {
    throw std::invalid_argument("cross-entropy eps_clip must be in (0, 0.1]");
  }
  LossKind kind;
  kind.type_ = Type::kCrossEntropyClipped;
  kind.eps_clip_ = eps_clip;
  return kind;
}

LossKind LossKind::Parse(const std::string& text) {
  if (text == "squared" || text == "mse") return SquaredError();
  if (text == "xent") return CrossEntropyClipped(1e-6);
  if (text.rfind("xent:", 0) == 0) {
    return CrossEntropyClipped(std::stod(text.substr(5)));
  }
  throw std::invalid_argument("unknown loss '" + text +
                              "' (expected squared or xent[:eps])");
}

std::string LossKind::ToString() const {
  if (type_ == Type::kSquaredError) return "squared";
  std::ostringstream out;
  out << "xent:" << eps_clip_;
  return out.str();
}

double PointLoss(const LossKind& kind, double pred, int label) {
  CheckPrediction(pred);
  switch (kind.type()) {
    case LossKind::Type::kSquaredError: {
      const double d = pred - label;
      return d * d;
    }
    case LossKind::Type::kCrossEntropyClipped: {
      const double eps = kind.eps_clip();
      return label == 1 ? -std::log(std::max(pred, eps))
                        : -std::log(std::max(1.0 - pred, eps));
    }
  }
  return 0.0;
}

double PointLossGrad(const LossKind& kind, double pred, int label) {
  CheckPrediction(pred);
  switch (kind.type()) {
    case LossKind::Type::kSquaredError:
      return 2.0 * (pred - label);
    case LossKind::Type::kCrossEntropyClipped: {
      const double eps = kind.eps_clip();
      if (label == 1) return pred > eps ? -1.0 / pred : 0.0;
      return 1.0 - pred > eps ? 1.0 / (1.0 - pred) : 0.0;
    }
  }
  return 0.0;
}

SurrogatePair SurrogateFromLosses(double loss_pos, double loss_neg,
                                  const ErrorParams& rho) {
  const double denom = rho.denominator();
  return {((1.0 - rho.rho10()) * loss_pos - rho.rho01() * loss_neg) / denom,
          ((1.0 - rho.rho01()) * loss_neg - rho.rho10() * loss_pos) / denom};
}

double SurrogateLoss(const LossKind& kind, double pred, int observed_label,
                     const ErrorParams& rho) {
  const SurrogatePair s = SurrogateFromLosses(
      PointLoss(kind, pred, 1), PointLoss(kind, pred, 0), rho);
  return observed_label == 1 ? s.positive : s.negative;
}

double SurrogateLossGrad(const LossKind& kind, double pred, int observed_label,
                         const ErrorParams& rho) {
  // l~ is linear in (l(f,1), l(f,0)), so the derivative has the same form.
  const SurrogatePair s = SurrogateFromLosses(
      PointLossGrad(kind, pred, 1), PointLossGrad(kind, pred, 0), rho);
  return observed_label == 1 ? s.positive : s.negative;
}

}  // namespace debiasrec
