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

// Semi-synthetic MNAR + noisy-feedback benchmark generator.
//
// A real-valued score matrix is turned into positive-feedback probabilities
// gamma over five levels {0.1, 0.3, 0.5, 0.7, 0.9} by quantile. From gamma the
// generator derives a prediction matrix to be evaluated, rating-dependent
// observation propensities, perturbed propensity estimates, and Bernoulli
// draws of the true preferences, the observation mask and the flipped
// (noisy) feedback.

#ifndef DEBIASREC_SYNTHBENCH_H_
#define DEBIASREC_SYNTHBENCH_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debiasrec/core.h"
#include "debiasrec/models.h"
#include "debiasrec/rng.h"

namespace debiasrec {

inline constexpr std::array<double, 5> kGammaLevels = {0.1, 0.3, 0.5, 0.7,
                                                       0.9};

enum class PredictionKind { kRotate, kSkew, kCrs, kOne, kThree, kFive };
enum class BetaMode { kNone, kPerPair, kPerRun };
enum class GammaSource { kQuantile, kSuppliedMatrix };

std::string_view PredictionKindName(PredictionKind kind);
std::optional<PredictionKind> ParsePredictionKind(std::string_view name);
std::vector<PredictionKind> AllPredictionKinds();
std::string_view BetaModeName(BetaMode mode);
std::optional<BetaMode> ParseBetaMode(std::string_view name);

struct BenchmarkSpec {
  std::size_t n_users = 500;
  std::size_t n_items = 500;
  // Shares of the levels 0.1, 0.3, 0.5, 0.7, 0.9 (ascending score order).
  std::array<double, 5> gamma_proportions = {0.2, 0.2, 0.2, 0.2, 0.2};
  double p_base = 1.0;
  double alpha = 0.5;
  ErrorParams rho = ErrorParams(0.2, 0.1);
  PredictionKind pred_kind = PredictionKind::kRotate;
  BetaMode beta_mode = BetaMode::kPerPair;
  std::uint64_t seed = 0;
  GammaSource gamma_source = GammaSource::kQuantile;
  double propensity_floor = kDefaultPropensityFloor;
};

// Field-named violations; empty when the spec is valid.
std::vector<std::string> ValidateBenchmarkSpec(const BenchmarkSpec& spec);

struct GammaMatrix {
  RealMatrix gamma;            // entries in kGammaLevels
  Matrix<int> five_scale;      // level index + 1, in 1..5
};

// Sorts `scores` ascending (ties by row-major index) and assigns the lowest
// proportions[0] share of cells level 0.1, the next proportions[1] share 0.3,
// and so on. Level boundaries are round(|D| * cumulative share).
GammaMatrix BuildGamma(const std::array<double, 5>& proportions,
                       const RealMatrix& scores);

// Wraps a supplied gamma matrix; throws std::invalid_argument unless every
// entry is one of kGammaLevels.
GammaMatrix GammaFromSupplied(const RealMatrix& gamma);

struct RatingTriple {
  std::size_t user = 0;
  std::size_t item = 0;
  double rating = 0.0;
};

struct CompletionConfig {
  std::size_t dim = 8;
  SgdConfig sgd;
};

// Regression MF (linear output, squared loss on the observed triples) trained
// by per-triple SGD, returning the dense completed score matrix. Item
// embeddings start at zero, so zero epochs yields an all-zero matrix.
// Throws TrainingDivergence if the training loss becomes non-finite.
RealMatrix CompleteRatingsMf(std::span<const RatingTriple> triples,
                             std::size_t n_users, std::size_t n_items,
                             const CompletionConfig& config);

// Random rank-`rank` score matrix U V^T with standard-normal factors; the
// stand-in for a completed real rating matrix.
RealMatrix LowRankScores(std::size_t n_users, std::size_t n_items,
                         std::size_t rank, Rng& rng);

// ROTATE / SKEW / CRS / ONE / THREE / FIVE prediction matrices. ONE, THREE
// and FIVE copy gamma and raise a uniformly random subset (reservoir sampled)
// of the cells at level 0.1 / 0.3 / 0.5 to 0.9; the subset size is the count
// of cells at 0.9, or all available cells with a warning if fewer exist.
PredictionMatrix BuildPredictionMatrix(PredictionKind kind,
                                       const RealMatrix& gamma, Rng& rng,
                                       std::vector<std::string>* warnings =
                                           nullptr);

// p_{u,i} = p_base * alpha^min(4, 6 - r_{u,i}); values above 1 are clipped
// to 1 with a warning.
RealMatrix AssignPropensities(double p_base, double alpha,
                              const Matrix<int>& five_scale,
                              std::vector<std::string>* warnings = nullptr);

// 1/p_hat = (1 - beta)/p + beta/p_e per pair, then raised to `floor`.
// Throws std::invalid_argument if p_e <= 0.
RealMatrix PerturbPropensities(const RealMatrix& p_true, double p_e,
                               const RealMatrix& beta, double floor);

// Draws beta according to `mode` (none: 0; per_pair: one U(0,1) per pair;
// per_run: a single U(0,1)) and applies PerturbPropensities with
// p_e = mean of the observation mask.
RealMatrix SamplePerturbedPropensities(const RealMatrix& p_true,
                                       const BinaryMatrix& observed_mask,
                                       BetaMode mode, double floor, Rng& rng);

struct BenchmarkInstance {
  BenchmarkSpec spec;
  RealMatrix gamma;
  Matrix<int> five_scale;
  PredictionMatrix prediction_matrix;
  RealMatrix p_true;            // raw, before any estimator floor
  RealMatrix p_hat_perturbed;   // floor applied
  RealMatrix true_ratings;      // r*
  RealMatrix observed_ratings;  // flipped r over the full matrix
  BinaryMatrix observed_mask;
  std::vector<std::string> warnings;

  // View as a dataset carrying the ground truth.
  RatingDataset ToDataset() const;
  PropensityMatrix TruePropensities() const;
  PropensityMatrix PerturbedPropensities() const;
};

// Runs the whole generator. `source` is the score matrix (Quantile) or the
// gamma matrix (SuppliedMatrix), of shape n_users x n_items. Random draws use
// Rng(spec.seed) in a fixed order: prediction matrix, then per pair
// (row-major) r*, o and the flip, then the propensity perturbation.
// Throws std::invalid_argument if the spec is invalid.
BenchmarkInstance SampleInstance(const BenchmarkSpec& spec,
                                 const RealMatrix& source);

}  // namespace debiasrec

#endif  // DEBIASREC_SYNTHBENCH_H_
