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

// Command-line driver. All logic lives here so tests can run commands
// in-process; main.cc only forwards argv.

#ifndef DEBIASREC_TOOLS_CLI_H_
#define DEBIASREC_TOOLS_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "debiasrec/estimators.h"
#include "debiasrec/io.h"
#include "debiasrec/synthbench.h"
#include "debiasrec/training.h"

namespace debiasrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

// Bad user input: reported with exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// `args` excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Config keys for a BenchmarkSpec: n_users, n_items, gamma_proportions
// (five comma-separated shares), p_base, alpha, rho01, rho10, pred_kind,
// beta_mode, seed, gamma_source, propensity_floor. Returns field-named
// violations, including those of ValidateBenchmarkSpec.
std::vector<std::string> ApplySpecConfig(const KeyValueConfig& config,
                                         BenchmarkSpec& spec);

// Keys under `alt.` and `sgd.{prediction,imputation,propensity,pretrain}.`.
// Throws ValidationError.
void ApplyTrainConfig(const KeyValueConfig& config, AltTrainConfig& alt);

struct EstimateRow {
  EstimatorKind kind = EstimatorKind::kNaive;
  std::optional<double> value;  // empty when `error` is set
  double p_star = 0.0;
  std::optional<double> re;
  std::string error;
};

// Evaluates each estimator against the ground truth in `dataset`. The
// imputed errors are the mean observed (surrogate) error, or zero with
// `zero_imputation`. Missing components become error rows.
std::vector<EstimateRow> EstimateAll(const RatingDataset& dataset,
                                     const PredictionMatrix& predictions,
                                     const PropensityMatrix* p_hat,
                                     const ErrorParams& rho,
                                     bool zero_imputation, const LossKind& loss,
                                     const std::vector<EstimatorKind>& kinds);

struct SweepOptions {
  BenchmarkSpec base;  // pred_kind and seed are overridden per run
  RealMatrix source;   // scores or gamma, per base.gamma_source
  std::vector<PredictionKind> kinds;
  std::vector<EstimatorKind> estimators;
  std::vector<std::uint64_t> seeds;
  bool true_propensities = true;
  std::optional<ErrorParams> given_rho;  // empty: the generating rho
  bool zero_imputation = false;
  LossKind loss;
  std::size_t jobs = 1;
};

struct SweepRow {
  std::uint64_t seed = 0;
  PredictionKind kind = PredictionKind::kRotate;
  EstimateRow row;
};

// One instance per (seed, kind); rows ordered by seed, kind, estimator
// regardless of `jobs`.
std::vector<SweepRow> RunSweep(const SweepOptions& options);

}  // namespace debiasrec::cli

#endif  // DEBIASREC_TOOLS_CLI_H_
