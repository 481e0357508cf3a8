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

// Training drivers: supervised baselines, pretraining of the noisy-rate model
// h, and alternating denoise training of the prediction and imputation models
// with live re-estimation of the flip rates.

#ifndef DEBIASREC_TRAINING_H_
#define DEBIASREC_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debiasrec/core.h"
#include "debiasrec/losses.h"
#include "debiasrec/models.h"
#include "debiasrec/noise.h"

namespace debiasrec {

enum class PretrainMethod { kNaive, kIps, kDr };

std::string_view PretrainMethodName(PretrainMethod method);
std::optional<PretrainMethod> ParsePretrainMethod(std::string_view name);

struct AltTrainConfig {
  std::size_t steps_prediction = 10;
  std::size_t steps_imputation = 10;
  std::size_t outer_loops = 30;
  ErrorParams rho_init;
  std::size_t k_extreme = 1;
  SgdConfig prediction{.learning_rate = 0.01,
                       .optimizer = OptimizerKind::kAdam};
  SgdConfig imputation{.learning_rate = 0.01,
                       .optimizer = OptimizerKind::kAdam};
  SgdConfig propensity{.learning_rate = 0.05, .batch_size = 0,
                       .weight_decay = 1e-5, .max_epochs = 100,
                       .optimizer = OptimizerKind::kAdam};
  // Epoch-based config for fitting h before the alternating loop.
  SgdConfig pretrain;
  PretrainMethod pretrain_method = PretrainMethod::kIps;
  std::size_t dim = 8;
  LossKind loss;
  // Keep rho at rho_init instead of refreshing it from h.
  bool freeze_rho = false;
  // Share of O held out for early stopping when prediction.patience > 0.
  double validation_fraction = 0.1;
  double propensity_floor = kDefaultPropensityFloor;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument naming the offending field.
void ValidateAltTrainConfig(const AltTrainConfig& config);

struct TraceRecord {
  std::size_t loop = 0;  // 1-based
  double rho01_hat = 0.0;
  double rho10_hat = 0.0;
  double objective = 0.0;  // full-D OME-DR estimate after the loop
  double val_metric = 0.0;  // NaN without a validation slice
  bool clamped = false;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  std::vector<std::string> warnings;
};

// Columns loop,rho01_hat,rho10_hat,objective,val_metric,clamped.
void WriteTraceCsv(std::ostream& out, const TrainTrace& trace);

// Epoch-based training of the prediction model on observed pairs with
// weights 1 (p_hat == nullptr) or 1/p_hat. Batches are drawn from a shuffled
// list of O. With config.patience > 0 a `validation_fraction` slice of O is
// held out and the best epoch on it is kept.
FactorModel TrainSupervised(const RatingDataset& dataset,
                            const PropensityMatrix* p_hat,
                            const SgdConfig& config, std::size_t dim,
                            const LossKind& loss,
                            double validation_fraction = 0.1);

// Divergence inside alternating training; carries the trace recorded so far.
class AlternatingDivergence : public TrainingDivergence {
 public:
  AlternatingDivergence(const std::string& what, std::size_t loop,
                        TrainTrace trace)
      : TrainingDivergence(what, loop), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct AltTrainResult {
  FactorModel prediction;
  ImputationModel imputation;
  TrainTrace trace;
};

// Alternating training. Each outer loop runs `steps_prediction` descent steps
// on the OME-DR objective over batches sampled from D, locates the k extreme
// pairs of f over all of D, refreshes rho from `noisy` at those pairs (unless
// frozen), then runs `steps_imputation` steps on the imputation loss over
// batches sampled from O. `noisy` may be null only when freeze_rho is set.
// Throws AlternatingDivergence if a gradient or the objective is not finite.
AltTrainResult AlternatingDenoiseTrain(const RatingDataset& dataset,
                                       const PropensityMatrix& p_hat,
                                       const NoisyRateModel* noisy,
                                       const AltTrainConfig& config);

// Fits h on the observed noisy labels without noise correction.
// kNaive and kIps use TrainSupervised with config.pretrain; kDr runs the
// alternating engine with rho frozen at (0, 0) for pretrain.max_epochs loops.
FactorModel PretrainNoisyModel(const RatingDataset& dataset,
                               PretrainMethod method,
                               const PropensityMatrix& p_hat,
                               const AltTrainConfig& config);

// Doubly robust joint learning: the alternating engine with rho frozen at
// (0, 0). Passing PropensityMatrix::Ones gives the error-imputation variant.
AltTrainResult TrainJointLearning(const RatingDataset& dataset,
                                  const PropensityMatrix& p_hat,
                                  const AltTrainConfig& config);

struct OmeAltResult {
  PropensityMatrix p_hat;
  FactorModel noisy_model;
  AltTrainResult alternating;
};

// Whole pipeline: fit the propensity model (unless `p_hat` is given),
// pretrain h, then run alternating training.
OmeAltResult TrainOmeAlt(const RatingDataset& dataset,
                         const AltTrainConfig& config,
                         const PropensityMatrix* p_hat = nullptr);

}  // namespace debiasrec

#endif  // DEBIASREC_TRAINING_H_
