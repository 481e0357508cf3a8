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

#include "debiasrec/models.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace debiasrec {
namespace {

void CheckSameLayout(const FactorParams& a, const FactorParams& b) {
  if (a.n_users() != b.n_users() || a.n_items() != b.n_items() ||
      a.dim() != b.dim()) {
    throw std::invalid_argument("gradient buffer does not match parameters");
  }
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double SquaredNorm(std::span<const double> a) { return Dot(a, a); }

int Label(double r) { return r != 0.0 ? 1 : 0; }

// Accumulates g * d score / d params into grad for pair (u, i).
void AccumulateScoreGrad(const FactorParams& params, std::size_t u,
                         std::size_t i, double g, FactorParams& grad) {
  auto gu = grad.user_emb(u);
  auto gi = grad.item_emb(i);
  const auto pu = params.user_emb(u);
  const auto pi = params.item_emb(i);
  for (std::size_t k = 0; k < params.dim(); ++k) {
    gu[k] += g * pi[k];
    gi[k] += g * pu[k];
  }
  grad.user_bias(u) += g;
  grad.item_bias(i) += g;
  grad.global_bias() += g;
}

void AccumulateEmbeddingDecay(const FactorParams& params, std::size_t u,
                              std::size_t i, double scale, FactorParams& grad) {
  auto gu = grad.user_emb(u);
  auto gi = grad.item_emb(i);
  const auto pu = params.user_emb(u);
  const auto pi = params.item_emb(i);
  for (std::size_t k = 0; k < params.dim(); ++k) {
    gu[k] += scale * pu[k];
    gi[k] += scale * pi[k];
  }
}

double EmbeddingDecay(const FactorParams& params, std::size_t u,
                      std::size_t i) {
  return SquaredNorm(params.user_emb(u)) + SquaredNorm(params.item_emb(i));
}

bool AllFinite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------------------
// FactorParams

FactorParams::FactorParams(std::size_t n_users, std::size_t n_items,
                           std::size_t dim)
    : n_users_(n_users),
      n_items_(n_items),
      dim_(dim),
      values_((n_users + n_items) * dim + n_users + n_items + 1, 0.0) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be >= 1");
}

FactorParams FactorParams::Random(std::size_t n_users, std::size_t n_items,
                                  std::size_t dim, Rng& rng,
                                  double init_stddev) {
  FactorParams p(n_users, n_items, dim);
  for (std::size_t k = 0; k < p.num_embedding_values(); ++k) {
    p.values_[k] = rng.Normal(0.0, init_stddev);
  }
  return p;
}

double FactorParams::Score(std::size_t u, std::size_t i) const {
  return Dot(user_emb(u), item_emb(i)) + user_bias(u) + item_bias(i) +
         global_bias();
}

void FactorParams::SetZero() { std::fill(values_.begin(), values_.end(), 0.0); }

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double ClippedSigmoid(double z) {
  return std::clamp(Sigmoid(z), kOutputEps, 1.0 - kOutputEps);
}

double ClippedSigmoidGrad(double z) {
  const double s = Sigmoid(z);
  if (s <= kOutputEps || s >= 1.0 - kOutputEps) return 0.0;
  return s * (1.0 - s);
}

PredictionMatrix FactorModel::PredictAll() const {
  RealMatrix out(params.n_users(), params.n_items());
  for (std::size_t u = 0; u < params.n_users(); ++u) {
    for (std::size_t i = 0; i < params.n_items(); ++i) {
      out(u, i) = Predict(u, i);
    }
  }
  return PredictionMatrix(std::move(out));
}

ImputationMatrix ImputationModel::PredictAll() const {
  RealMatrix out(params.n_users(), params.n_items());
  for (std::size_t u = 0; u < params.n_users(); ++u) {
    for (std::size_t i = 0; i < params.n_items(); ++i) {
      out(u, i) = Predict(u, i);
    }
  }
  return ImputationMatrix(std::move(out));
}

// ---------------------------------------------------------------------------
// PropensityModel

PropensityModel::PropensityModel(std::size_t n_users, std::size_t n_items)
    : n_users_(n_users),
      n_items_(n_items),
      values_(2 * (n_users + n_items), 0.0) {}

PropensityMatrix PropensityModel::PredictAll(double floor) const {
  RealMatrix out(n_users_, n_items_);
  for (std::size_t u = 0; u < n_users_; ++u) {
    for (std::size_t i = 0; i < n_items_; ++i) {
      out(u, i) = std::clamp(Predict(u, i), floor, 1.0 - 1e-6);
    }
  }
  return PropensityMatrix(std::move(out), floor);
}

// ---------------------------------------------------------------------------
// Optimizers

void ValidateSgdConfig(const SgdConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (!(config.weight_decay >= 0.0)) {
    throw std::invalid_argument("weight_decay must be >= 0");
  }
  if (config.optimizer == OptimizerKind::kAdam &&
      !(config.adam_beta1 >= 0.0 && config.adam_beta1 < 1.0 &&
        config.adam_beta2 >= 0.0 && config.adam_beta2 < 1.0 &&
        config.adam_eps > 0.0)) {
    throw std::invalid_argument("invalid Adam hyperparameters");
  }
}

Optimizer::Optimizer(const SgdConfig& config, std::size_t num_params)
    : config_(config) {
  ValidateSgdConfig(config);
  if (config.optimizer == OptimizerKind::kAdam) {
    m_.assign(num_params, 0.0);
    v_.assign(num_params, 0.0);
  }
}

void Optimizer::Step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) {
    throw std::invalid_argument("parameter and gradient sizes differ");
  }
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
    return;
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("optimizer state size mismatch");
  }
  ++t_;
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = b1 * m_[k] + (1.0 - b1) * grad[k];
    v_[k] = b2 * v_[k] + (1.0 - b2) * grad[k] * grad[k];
    params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.adam_eps);
  }
}

// ---------------------------------------------------------------------------
// Prediction model: OME-DR objective

double SurrogateObjective(const FactorParams& theta, const SurrogateBatch& batch,
                          const RatingDataset& dataset,
                          const PropensityMatrix& p_hat,
                          const ErrorParams& rho_hat, const LossKind& loss,
                          double weight_decay) {
  if (batch.pairs.size() != batch.e_bar.size()) {
    throw std::invalid_argument("e_bar batch is not aligned with pairs");
  }
  if (batch.pairs.empty()) return 0.0;
  double sum = 0.0;
  double decay = 0.0;
  for (std::size_t b = 0; b < batch.pairs.size(); ++b) {
    const auto [u, i] = batch.pairs[b];
    const double o = dataset.observed_mask(u, i);
    const double p = p_hat(u, i);
    double observed = 0.0;
    if (o != 0.0) {
      const double f = ClippedSigmoid(theta.Score(u, i));
      observed = SurrogateLoss(loss, f, Label(dataset.observed_ratings(u, i)),
                               rho_hat);
    }
    sum += (1.0 - o / p) * batch.e_bar[b] + o * observed / p;
    decay += EmbeddingDecay(theta, u, i);
  }
  const double n = static_cast<double>(batch.pairs.size());
  return sum / n + 0.5 * weight_decay * decay / n;
}

void SurrogateGradient(const FactorParams& theta, const SurrogateBatch& batch,
                       const RatingDataset& dataset,
                       const PropensityMatrix& p_hat,
                       const ErrorParams& rho_hat, const LossKind& loss,
                       double weight_decay, FactorParams& grad) {
  CheckSameLayout(theta, grad);
  grad.SetZero();
  if (batch.pairs.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
  for (const auto& [u, i] : batch.pairs) {
    if (dataset.observed(u, i)) {
      const double z = theta.Score(u, i);
      const double f = ClippedSigmoid(z);
      const double dloss = SurrogateLossGrad(
          loss, f, Label(dataset.observed_ratings(u, i)), rho_hat);
      const double g = inv_n * dloss / p_hat(u, i) * ClippedSigmoidGrad(z);
      AccumulateScoreGrad(theta, u, i, g, grad);
    }
    if (weight_decay != 0.0) {
      AccumulateEmbeddingDecay(theta, u, i, weight_decay * inv_n, grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Imputation model

double ImputationObjective(const FactorParams& phi, const ImputationBatch& batch,
                           const RatingDataset& dataset,
                           const PropensityMatrix& p_hat,
                           const ErrorParams& rho_hat, const LossKind& loss,
                           double weight_decay) {
  if (batch.pairs.size() != batch.predictions.size()) {
    throw std::invalid_argument("prediction batch is not aligned with pairs");
  }
  if (batch.pairs.empty()) return 0.0;
  double sum = 0.0;
  double decay = 0.0;
  for (std::size_t b = 0; b < batch.pairs.size(); ++b) {
    const auto [u, i] = batch.pairs[b];
    decay += EmbeddingDecay(phi, u, i);
    if (!dataset.observed(u, i)) continue;
    const double target =
        SurrogateLoss(loss, batch.predictions[b],
                      Label(dataset.observed_ratings(u, i)), rho_hat);
    const double residual = target - phi.Score(u, i);
    sum += residual * residual / p_hat(u, i);
  }
  const double n = static_cast<double>(batch.pairs.size());
  return sum / n + 0.5 * weight_decay * decay / n;
}

void ImputationGradient(const FactorParams& phi, const ImputationBatch& batch,
                        const RatingDataset& dataset,
                        const PropensityMatrix& p_hat,
                        const ErrorParams& rho_hat, const LossKind& loss,
                        double weight_decay, FactorParams& grad) {
  if (batch.pairs.size() != batch.predictions.size()) {
    throw std::invalid_argument("prediction batch is not aligned with pairs");
  }
  CheckSameLayout(phi, grad);
  grad.SetZero();
  if (batch.pairs.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(batch.pairs.size());
  for (std::size_t b = 0; b < batch.pairs.size(); ++b) {
    const auto [u, i] = batch.pairs[b];
    if (dataset.observed(u, i)) {
      const double target =
          SurrogateLoss(loss, batch.predictions[b],
                        Label(dataset.observed_ratings(u, i)), rho_hat);
      const double residual = target - phi.Score(u, i);
      AccumulateScoreGrad(phi, u, i, -2.0 * inv_n * residual / p_hat(u, i),
                          grad);
    }
    if (weight_decay != 0.0) {
      AccumulateEmbeddingDecay(phi, u, i, weight_decay * inv_n, grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Propensity model

double PropensityObjective(const PropensityModel& psi,
                           std::span<const PairIndex> batch,
                           const RatingDataset& dataset, double weight_decay) {
  if (batch.empty()) return 0.0;
  double sum = 0.0;
  double decay = 0.0;
  for (const auto& [u, i] : batch) {
    const double z = psi.Logit(u, i);
    const double o = dataset.observed_mask(u, i);
    sum += Softplus(z) - o * z;
    decay += psi.w_user(u) * psi.w_user(u) + psi.w_item(i) * psi.w_item(i);
  }
  const double n = static_cast<double>(batch.size());
  return sum / n + 0.5 * weight_decay * decay / n;
}

void PropensityGradient(const PropensityModel& psi,
                        std::span<const PairIndex> batch,
                        const RatingDataset& dataset, double weight_decay,
                        PropensityModel& grad) {
  if (grad.n_users() != psi.n_users() || grad.n_items() != psi.n_items()) {
    throw std::invalid_argument("gradient buffer does not match parameters");
  }
  auto flat = grad.flat();
  std::fill(flat.begin(), flat.end(), 0.0);
  if (batch.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& [u, i] : batch) {
    const double g =
        inv_n * (Sigmoid(psi.Logit(u, i)) - dataset.observed_mask(u, i));
    grad.w_user(u) += g + weight_decay * inv_n * psi.w_user(u);
    grad.w_item(i) += g + weight_decay * inv_n * psi.w_item(i);
    grad.beta_user(u) += g;
    grad.gamma_item(i) += g;
  }
}

double PropensityLoss(const PropensityModel& psi,
                      const RatingDataset& dataset) {
  double sum = 0.0;
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) {
      const double z = psi.Logit(u, i);
      sum += Softplus(z) - dataset.observed_mask(u, i) * z;
    }
  }
  return sum / static_cast<double>(dataset.num_pairs());
}

// ---------------------------------------------------------------------------
// Supervised baseline objective

double SupervisedObjective(const FactorParams& theta,
                           std::span<const PairIndex> pairs,
                           const RatingDataset& dataset,
                           const PropensityMatrix* p_hat, const LossKind& loss,
                           double weight_decay) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  double decay = 0.0;
  for (const auto& [u, i] : pairs) {
    decay += EmbeddingDecay(theta, u, i);
    if (!dataset.observed(u, i)) continue;
    const double w = p_hat == nullptr ? 1.0 : 1.0 / (*p_hat)(u, i);
    const double f = ClippedSigmoid(theta.Score(u, i));
    sum += w * PointLoss(loss, f, Label(dataset.observed_ratings(u, i)));
  }
  const double n = static_cast<double>(pairs.size());
  return sum / n + 0.5 * weight_decay * decay / n;
}

void SupervisedGradient(const FactorParams& theta,
                        std::span<const PairIndex> pairs,
                        const RatingDataset& dataset,
                        const PropensityMatrix* p_hat, const LossKind& loss,
                        double weight_decay, FactorParams& grad) {
  CheckSameLayout(theta, grad);
  grad.SetZero();
  if (pairs.empty()) return;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [u, i] : pairs) {
    if (dataset.observed(u, i)) {
      const double w = p_hat == nullptr ? 1.0 : 1.0 / (*p_hat)(u, i);
      const double z = theta.Score(u, i);
      const double f = ClippedSigmoid(z);
      const double g =
          inv_n * w *
          PointLossGrad(loss, f, Label(dataset.observed_ratings(u, i))) *
          ClippedSigmoidGrad(z);
      AccumulateScoreGrad(theta, u, i, g, grad);
    }
    if (weight_decay != 0.0) {
      AccumulateEmbeddingDecay(theta, u, i, weight_decay * inv_n, grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Steps and training loops

namespace {

// Finite parameters can still overflow in the dot product.
bool BatchScoresFinite(const FactorParams& params,
                       std::span<const PairIndex> pairs) {
  for (const auto& [u, i] : pairs) {
    if (!std::isfinite(params.Score(u, i))) return false;
  }
  return true;
}

}  // namespace

void SgdStepSurrogate(FactorModel& model, const SurrogateBatch& batch,
                      const RatingDataset& dataset,
                      const PropensityMatrix& p_hat, const ErrorParams& rho_hat,
                      const LossKind& loss, const SgdConfig& config,
                      Optimizer& optimizer) {
  if (!AllFinite(model.params.flat())) {
    throw TrainingDivergence("non-finite parameters in prediction step", 0);
  }
  if (!BatchScoresFinite(model.params, batch.pairs)) {
    throw TrainingDivergence("non-finite score in prediction step", 0);
  }
  FactorParams grad(model.params.n_users(), model.params.n_items(),
                    model.params.dim());
  SurrogateGradient(model.params, batch, dataset, p_hat, rho_hat, loss,
                    config.weight_decay, grad);
  if (!AllFinite(grad.flat())) {
    throw TrainingDivergence("non-finite gradient in prediction step", 0);
  }
  optimizer.Step(model.params.flat(), grad.flat());
  if (!AllFinite(model.params.flat())) {
    throw TrainingDivergence("non-finite parameters after prediction step", 0);
  }
}

void SgdStepImputation(ImputationModel& model, const ImputationBatch& batch,
                       const RatingDataset& dataset,
                       const PropensityMatrix& p_hat,
                       const ErrorParams& rho_hat, const LossKind& loss,
                       const SgdConfig& config, Optimizer& optimizer) {
  if (!BatchScoresFinite(model.params, batch.pairs)) {
    throw TrainingDivergence("non-finite score in imputation step", 0);
  }
  FactorParams grad(model.params.n_users(), model.params.n_items(),
                    model.params.dim());
  ImputationGradient(model.params, batch, dataset, p_hat, rho_hat, loss,
                     config.weight_decay, grad);
  if (!AllFinite(grad.flat())) {
    throw TrainingDivergence("non-finite gradient in imputation step", 0);
  }
  optimizer.Step(model.params.flat(), grad.flat());
  if (!AllFinite(model.params.flat())) {
    throw TrainingDivergence("non-finite parameters after imputation step", 0);
  }
}

PropensityModel TrainPropensity(const RatingDataset& dataset,
                                const SgdConfig& config,
                                std::vector<double>* loss_history) {
  ValidateSgdConfig(config);
  PropensityModel psi(dataset.n_users, dataset.n_items);
  PropensityModel grad(dataset.n_users, dataset.n_items);
  Optimizer optimizer(config, psi.flat().size());
  Rng rng(config.seed);

  std::vector<PairIndex> pairs;
  pairs.reserve(dataset.num_pairs());
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) pairs.push_back({u, i});
  }
  const bool full_batch =
      config.batch_size == 0 || config.batch_size >= pairs.size();
  const std::size_t batch_size = full_batch ? pairs.size() : config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (!full_batch) Shuffle(std::span<PairIndex>(pairs), rng);
    for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, pairs.size() - start);
      const std::span<const PairIndex> batch(pairs.data() + start, len);
      PropensityGradient(psi, batch, dataset, config.weight_decay, grad);
      optimizer.Step(psi.flat(), grad.flat());
    }
    const double loss = PropensityLoss(psi, dataset);
    if (!std::isfinite(loss) || !AllFinite(psi.flat())) {
      std::ostringstream msg;
      msg << "propensity training diverged at epoch " << epoch;
      throw TrainingDivergence(msg.str(), epoch);
    }
    if (loss_history != nullptr) loss_history->push_back(loss);
  }
  return psi;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "debiasrec-checkpoint";
constexpr int kVersion = 1;

void WriteArray(std::ostream& out, const char* name, std::size_t rows,
                std::size_t cols, std::span<const double> values) {
  out << "array " << name << ' ' << rows << ' ' << cols << '\n';
  std::ostringstream line;
  line.precision(17);
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0) line << ' ';
    line << values[k];
  }
  out << line.str() << '\n';
}

void WriteFactorParams(std::ostream& out, const char* kind,
                       const FactorParams& p) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << kind << '\n';
  out << "shape " << p.n_users() << ' ' << p.n_items() << ' ' << p.dim()
      << '\n';
  const auto flat = p.flat();
  const std::size_t n = p.n_users(), m = p.n_items(), d = p.dim();
  WriteArray(out, "user_emb", n, d, flat.subspan(0, n * d));
  WriteArray(out, "item_emb", m, d, flat.subspan(n * d, m * d));
  WriteArray(out, "user_bias", n, 1, flat.subspan((n + m) * d, n));
  WriteArray(out, "item_bias", m, 1, flat.subspan((n + m) * d + n, m));
  WriteArray(out, "global_bias", 1, 1, flat.subspan((n + m) * d + n + m, 1));
  out << "end\n";
}

[[noreturn]] void Malformed(const std::string& why) {
  throw std::runtime_error("malformed checkpoint: " + why);
}

void ExpectToken(std::istream& in, const std::string& expected) {
  std::string token;
  if (!(in >> token) || token != expected) {
    Malformed("expected '" + expected + "', got '" + token + "'");
  }
}

void ReadHeader(std::istream& in, const std::string& kind) {
  ExpectToken(in, kMagic);
  int version = 0;
  if (!(in >> version) || version != kVersion) {
    Malformed("unsupported version " + std::to_string(version));
  }
  ExpectToken(in, "kind");
  std::string actual;
  in >> actual;
  if (actual != kind) Malformed("expected kind " + kind + ", got " + actual);
}

void ReadArray(std::istream& in, const std::string& name, std::size_t rows,
               std::size_t cols, std::span<double> dest) {
  ExpectToken(in, "array");
  ExpectToken(in, name);
  std::size_t r = 0, c = 0;
  if (!(in >> r >> c) || r != rows || c != cols) {
    Malformed("array " + name + " has unexpected shape");
  }
  for (auto& v : dest) {
    if (!(in >> v)) Malformed("array " + name + " is truncated");
  }
}

FactorParams ReadFactorParams(std::istream& in, const std::string& kind) {
  ReadHeader(in, kind);
  ExpectToken(in, "shape");
  std::size_t n = 0, m = 0, d = 0;
  if (!(in >> n >> m >> d) || d == 0) Malformed("bad shape line");
  FactorParams p(n, m, d);
  auto flat = p.flat();
  ReadArray(in, "user_emb", n, d, flat.subspan(0, n * d));
  ReadArray(in, "item_emb", m, d, flat.subspan(n * d, m * d));
  ReadArray(in, "user_bias", n, 1, flat.subspan((n + m) * d, n));
  ReadArray(in, "item_bias", m, 1, flat.subspan((n + m) * d + n, m));
  ReadArray(in, "global_bias", 1, 1, flat.subspan((n + m) * d + n + m, 1));
  ExpectToken(in, "end");
  return p;
}

}  // namespace

void WriteCheckpoint(std::ostream& out, const FactorModel& model) {
  WriteFactorParams(out, "factor", model.params);
}

void WriteCheckpoint(std::ostream& out, const ImputationModel& model) {
  WriteFactorParams(out, "imputation", model.params);
}

void WriteCheckpoint(std::ostream& out, const PropensityModel& model) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind propensity\n";
  const std::size_t n = model.n_users(), m = model.n_items();
  out << "shape " << n << ' ' << m << '\n';
  const auto flat = model.flat();
  WriteArray(out, "w_user", n, 1, flat.subspan(0, n));
  WriteArray(out, "w_item", m, 1, flat.subspan(n, m));
  WriteArray(out, "beta_user", n, 1, flat.subspan(n + m, n));
  WriteArray(out, "gamma_item", m, 1, flat.subspan(2 * n + m, m));
  out << "end\n";
}

FactorModel ReadFactorCheckpoint(std::istream& in) {
  return FactorModel{ReadFactorParams(in, "factor")};
}

ImputationModel ReadImputationCheckpoint(std::istream& in) {
  return ImputationModel{ReadFactorParams(in, "imputation")};
}

PropensityModel ReadPropensityCheckpoint(std::istream& in) {
  ReadHeader(in, "propensity");
  ExpectToken(in, "shape");
  std::size_t n = 0, m = 0;
  if (!(in >> n >> m)) Malformed("bad shape line");
  PropensityModel model(n, m);
  auto flat = model.flat();
  ReadArray(in, "w_user", n, 1, flat.subspan(0, n));
  ReadArray(in, "w_item", m, 1, flat.subspan(n, m));
  ReadArray(in, "beta_user", n, 1, flat.subspan(n + m, n));
  ReadArray(in, "gamma_item", m, 1, flat.subspan(2 * n + m, m));
  ExpectToken(in, "end");
  return model;
}

}  // namespace debiasrec
