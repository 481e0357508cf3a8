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

// Prediction-inaccuracy estimators over the full user-item universe D.
//
// The plain family (naive, EIB, IPS, DR) scores predictions against the
// observed, possibly noisy, ratings. The OME family replaces the observed
// error by the surrogate error
//   e~ = r * l~(f, 1) + (1 - r) * l~(f, 0)
// built from estimated flip rates, which makes the estimators unbiased for
// the inaccuracy against the true preferences r*.
//
// All sums run row-major over (u, i) and are divided by |D| (or |O| for the
// naive estimator), so results are bit-reproducible for identical inputs.

#ifndef DEBIASREC_ESTIMATORS_H_
#define DEBIASREC_ESTIMATORS_H_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "debiasrec/core.h"
#include "debiasrec/losses.h"

namespace debiasrec {

enum class EstimatorKind { kNaive, kEib, kIps, kDr, kOmeEib, kOmeIps, kOmeDr };

std::string_view EstimatorName(EstimatorKind kind);
// Accepts the names returned by EstimatorName ("naive", "ome_dr", ...).
std::optional<EstimatorKind> ParseEstimatorKind(std::string_view name);
std::vector<EstimatorKind> AllEstimatorKinds();

bool NeedsPropensities(EstimatorKind kind);
bool NeedsImputation(EstimatorKind kind);
bool NeedsErrorParams(EstimatorKind kind);

// Raised when an estimator is asked to run without a required component.
class MissingComponentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Borrowed views of the estimator inputs; the referenced objects must outlive
// the call. `e_bar` holds the imputed errors: e_hat for EIB/DR, e_bar for the
// OME family. `rho_hat` is only read by the OME family.
struct EstimatorInputs {
  const RatingDataset* dataset = nullptr;
  const PredictionMatrix* predictions = nullptr;
  const PropensityMatrix* p_hat = nullptr;
  const ImputationMatrix* e_bar = nullptr;
  std::optional<ErrorParams> rho_hat;
  LossKind loss;
};

// P* = |D|^-1 sum_D l(f, r*). Requires dataset.true_ratings.
double TrueInaccuracy(const PredictionMatrix& predictions,
                      const RatingDataset& dataset, const LossKind& loss);

double EstimateNaive(const EstimatorInputs& in);
double EstimateEib(const EstimatorInputs& in);
double EstimateIps(const EstimatorInputs& in);
// Evaluated as (1 - o/p) e_hat + o e / p, algebraically equal to
// e_hat + o (e - e_hat) / p and term-for-term identical to the OME-DR form.
double EstimateDr(const EstimatorInputs& in);
double EstimateOmeEib(const EstimatorInputs& in);
double EstimateOmeIps(const EstimatorInputs& in);
double EstimateOmeDr(const EstimatorInputs& in);

double Estimate(EstimatorKind kind, const EstimatorInputs& in);

// Expected surrogate-error weights under mis-specified flip rates:
//   E[e~ | r* = 1] = w11 l(f,1) + w01 l(f,0)
//   E[e~ | r* = 0] = w10 l(f,1) + w00 l(f,0)
struct BiasWeights {
  double w11 = 1.0;
  double w01 = 0.0;
  double w10 = 0.0;
  double w00 = 1.0;
};
BiasWeights OmeDrBiasWeights(const ErrorParams& rho_true,
                             const ErrorParams& rho_hat);

struct BiasOracleInputs {
  const RatingDataset* dataset = nullptr;  // must carry true_ratings
  const PredictionMatrix* predictions = nullptr;
  const PropensityMatrix* p_true = nullptr;
  const PropensityMatrix* p_hat = nullptr;
  const ImputationMatrix* e_bar = nullptr;
  ErrorParams rho_true;
  ErrorParams rho_hat;
  LossKind loss;
};

// E_{O, R | R*}[OME-DR] - P* in closed form. The (1 - o/p_hat) e_bar term is
// taken at its expectation (1 - p_true/p_hat) e_bar, so the result is the
// exact expectation over independent o ~ Bern(p_true) and r | r* flips.
double SignedBiasOmeDr(const BiasOracleInputs& in);

// |SignedBiasOmeDr(in)|.
double BiasOmeDrOracle(const BiasOracleInputs& in);

// |target - estimate| / target; throws std::invalid_argument if target <= 0.
double RelativeError(double target, double estimate);

// Constant imputation: the mean observed error (surrogate error when `rho` is
// given) broadcast over D.
ImputationMatrix MeanObservedImputation(const RatingDataset& dataset,
                                        const PredictionMatrix& predictions,
                                        const LossKind& loss,
                                        const std::optional<ErrorParams>& rho);

}  // namespace debiasrec

#endif  // DEBIASREC_ESTIMATORS_H_
