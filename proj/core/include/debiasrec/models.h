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

// Trainable models and their analytic gradients:
//
//   FactorModel      f(u,i) = sigmoid(<U_u, V_i> + b_u + b_i + b0), clipped
//   ImputationModel  e_bar(u,i) = <U_u, V_i> + b_u + b_i + b0
//   PropensityModel  p(u,i) = sigmoid(w_u + w_i + beta_u + gamma_i)
//
// The propensity model is logistic regression on the one-hot user (+) item
// feature, so its weight vector splits into per-user and per-item entries.
//
// Each objective has a matching gradient routine that writes a dense gradient
// with the same flat layout as the parameters. Optimizers then update the flat
// vector in place.

#ifndef DEBIASREC_MODELS_H_
#define DEBIASREC_MODELS_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "debiasrec/core.h"
#include "debiasrec/losses.h"
#include "debiasrec/rng.h"

namespace debiasrec {

// Biased matrix-factorization parameters in one flat array laid out as
// [user_emb N*d | item_emb M*d | user_bias N | item_bias M | global_bias].
class FactorParams {
 public:
  FactorParams() = default;
  // All parameters zero. Throws std::invalid_argument if dim == 0.
  FactorParams(std::size_t n_users, std::size_t n_items, std::size_t dim);

  // Embeddings i.i.d. N(0, init_stddev^2), biases zero.
  static FactorParams Random(std::size_t n_users, std::size_t n_items,
                             std::size_t dim, Rng& rng,
                             double init_stddev = 0.01);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t dim() const { return dim_; }

  std::span<double> user_emb(std::size_t u) {
    return {values_.data() + u * dim_, dim_};
  }
  std::span<const double> user_emb(std::size_t u) const {
    return {values_.data() + u * dim_, dim_};
  }
  std::span<double> item_emb(std::size_t i) {
    return {values_.data() + item_offset() + i * dim_, dim_};
  }
  std::span<const double> item_emb(std::size_t i) const {
    return {values_.data() + item_offset() + i * dim_, dim_};
  }
  double& user_bias(std::size_t u) { return values_[user_bias_offset() + u]; }
  double user_bias(std::size_t u) const {
    return values_[user_bias_offset() + u];
  }
  double& item_bias(std::size_t i) { return values_[item_bias_offset() + i]; }
  double item_bias(std::size_t i) const {
    return values_[item_bias_offset() + i];
  }
  double& global_bias() { return values_.back(); }
  double global_bias() const { return values_.back(); }

  // <U_u, V_i> + b_u + b_i + b0.
  double Score(std::size_t u, std::size_t i) const;

  // Number of embedding entries; the leading part of flat().
  std::size_t num_embedding_values() const {
    return (n_users_ + n_items_) * dim_;
  }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  void SetZero();

  friend bool operator==(const FactorParams&, const FactorParams&) = default;

 private:
  std::size_t item_offset() const { return n_users_ * dim_; }
  std::size_t user_bias_offset() const { return (n_users_ + n_items_) * dim_; }
  std::size_t item_bias_offset() const {
    return user_bias_offset() + n_users_;
  }

  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

double Sigmoid(double z);

// Sigmoid clipped to [kOutputEps, 1 - kOutputEps].
double ClippedSigmoid(double z);

// d ClippedSigmoid / dz; zero where the clip is active.
double ClippedSigmoidGrad(double z);

struct FactorModel {
  FactorParams params;

  double Predict(std::size_t u, std::size_t i) const {
    return ClippedSigmoid(params.Score(u, i));
  }
  PredictionMatrix PredictAll() const;
};

struct ImputationModel {
  FactorParams params;

  double Predict(std::size_t u, std::size_t i) const {
    return params.Score(u, i);
  }
  ImputationMatrix PredictAll() const;
};

// Logistic-regression propensity model, flat layout
// [w_user N | w_item M | beta_user N | gamma_item M].
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(std::size_t n_users, std::size_t n_items);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }

  double& w_user(std::size_t u) { return values_[u]; }
  double& w_item(std::size_t i) { return values_[n_users_ + i]; }
  double& beta_user(std::size_t u) { return values_[n_users_ + n_items_ + u]; }
  double& gamma_item(std::size_t i) {
    return values_[2 * n_users_ + n_items_ + i];
  }
  double w_user(std::size_t u) const { return values_[u]; }
  double w_item(std::size_t i) const { return values_[n_users_ + i]; }
  double beta_user(std::size_t u) const {
    return values_[n_users_ + n_items_ + u];
  }
  double gamma_item(std::size_t i) const {
    return values_[2 * n_users_ + n_items_ + i];
  }

  double Logit(std::size_t u, std::size_t i) const {
    return w_user(u) + w_item(i) + beta_user(u) + gamma_item(i);
  }
  // Unclipped sigmoid of the logit.
  double Predict(std::size_t u, std::size_t i) const {
    return Sigmoid(Logit(u, i));
  }
  // Clipped to [floor, 1 - 1e-6].
  PropensityMatrix PredictAll(double floor = kDefaultPropensityFloor) const;

  // Entries that receive weight decay (the w part).
  std::size_t num_weight_values() const { return n_users_ + n_items_; }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  friend bool operator==(const PropensityModel&,
                         const PropensityModel&) = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<double> values_;
};

enum class OptimizerKind { kSgd, kAdam };

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 256;
  double weight_decay = 1e-5;
  std::size_t max_epochs = 20;
  std::size_t patience = 0;  // 0 disables early stopping
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Throws std::invalid_argument if a field is out of range.
void ValidateSgdConfig(const SgdConfig& config);

// Updates a flat parameter vector from a gradient of the same length.
class Optimizer {
 public:
  Optimizer(const SgdConfig& config, std::size_t num_params);

  void Step(std::span<double> params, std::span<const double> grad);

 private:
  SgdConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

// Raised when an objective or gradient becomes non-finite.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::size_t epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

// ---------------------------------------------------------------------------
// Objectives. Batches are lists of pairs; every objective averages over the
// batch and adds (weight_decay / 2) * mean over the batch of the squared norms
// of the touched embeddings (propensity: of the touched w entries).

// Mini-batch OME-DR objective of the prediction model:
//   1/B sum_b [(1 - o/p) e_bar_b + o e~(f_theta(u,i), r) / p].
// `e_bar_batch` holds e_bar for each batch entry; it does not depend on theta.
struct SurrogateBatch {
  std::span<const PairIndex> pairs;
  std::span<const double> e_bar;  // aligned with pairs
};

double SurrogateObjective(const FactorParams& theta, const SurrogateBatch& batch,
                          const RatingDataset& dataset,
                          const PropensityMatrix& p_hat,
                          const ErrorParams& rho_hat, const LossKind& loss,
                          double weight_decay);

void SurrogateGradient(const FactorParams& theta, const SurrogateBatch& batch,
                       const RatingDataset& dataset,
                       const PropensityMatrix& p_hat,
                       const ErrorParams& rho_hat, const LossKind& loss,
                       double weight_decay, FactorParams& grad);

// Imputation objective on a batch drawn from O:
//   1/B sum_b o (e~_b - e_bar_phi(u,i))^2 / p,
// with e~_b computed from `predictions` (aligned with pairs) and rho_hat.
struct ImputationBatch {
  std::span<const PairIndex> pairs;
  std::span<const double> predictions;  // f_theta at each pair
};

double ImputationObjective(const FactorParams& phi, const ImputationBatch& batch,
                           const RatingDataset& dataset,
                           const PropensityMatrix& p_hat,
                           const ErrorParams& rho_hat, const LossKind& loss,
                           double weight_decay);

void ImputationGradient(const FactorParams& phi, const ImputationBatch& batch,
                        const RatingDataset& dataset,
                        const PropensityMatrix& p_hat,
                        const ErrorParams& rho_hat, const LossKind& loss,
                        double weight_decay, FactorParams& grad);

// Binary cross-entropy of the observation indicator over a batch from D.
double PropensityObjective(const PropensityModel& psi,
                           std::span<const PairIndex> batch,
                           const RatingDataset& dataset, double weight_decay);

void PropensityGradient(const PropensityModel& psi,
                        std::span<const PairIndex> batch,
                        const RatingDataset& dataset, double weight_decay,
                        PropensityModel& grad);

// Plain supervised objective of the prediction model on observed labels:
//   1/B sum_b w_b l(f_theta(u,i), r), w_b = 1 (naive) or o/p (IPS).
// Used by the baseline and pretraining paths.
double SupervisedObjective(const FactorParams& theta,
                           std::span<const PairIndex> pairs,
                           const RatingDataset& dataset,
                           const PropensityMatrix* p_hat, const LossKind& loss,
                           double weight_decay);

void SupervisedGradient(const FactorParams& theta,
                        std::span<const PairIndex> pairs,
                        const RatingDataset& dataset,
                        const PropensityMatrix* p_hat, const LossKind& loss,
                        double weight_decay, FactorParams& grad);

// ---------------------------------------------------------------------------
// Single optimizer steps. Each throws TrainingDivergence (epoch 0) if the
// parameters or the gradient are not finite.

void SgdStepSurrogate(FactorModel& model, const SurrogateBatch& batch,
                      const RatingDataset& dataset,
                      const PropensityMatrix& p_hat, const ErrorParams& rho_hat,
                      const LossKind& loss, const SgdConfig& config,
                      Optimizer& optimizer);

void SgdStepImputation(ImputationModel& model, const ImputationBatch& batch,
                       const RatingDataset& dataset,
                       const PropensityMatrix& p_hat,
                       const ErrorParams& rho_hat, const LossKind& loss,
                       const SgdConfig& config, Optimizer& optimizer);

// Fits the propensity model by mini-batch descent on the full-D cross-entropy
// (full batch when config.batch_size is 0 or >= |D|). Parameters start at zero.
// If `loss_history` is non-null it receives the full-D loss after each epoch.
// Throws TrainingDivergence naming the epoch if the loss becomes non-finite.
PropensityModel TrainPropensity(const RatingDataset& dataset,
                                const SgdConfig& config,
                                std::vector<double>* loss_history = nullptr);

// Full-D cross-entropy of the observation indicator.
double PropensityLoss(const PropensityModel& psi, const RatingDataset& dataset);

// ---------------------------------------------------------------------------
// Checkpoints: versioned text format with one shape header per array.

void WriteCheckpoint(std::ostream& out, const FactorModel& model);
void WriteCheckpoint(std::ostream& out, const ImputationModel& model);
void WriteCheckpoint(std::ostream& out, const PropensityModel& model);

// Throw std::runtime_error on malformed input or a kind mismatch.
FactorModel ReadFactorCheckpoint(std::istream& in);
ImputationModel ReadImputationCheckpoint(std::istream& in);
PropensityModel ReadPropensityCheckpoint(std::istream& in);

}  // namespace debiasrec

#endif  // DEBIASREC_MODELS_H_
