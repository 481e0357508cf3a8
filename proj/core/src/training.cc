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

#include "debiasrec/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "debiasrec/estimators.h"

namespace debiasrec {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<PairIndex> ObservedPairs(const RatingDataset& dataset) {
  std::vector<PairIndex> out;
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) {
      if (dataset.observed(u, i)) out.push_back({u, i});
    }
  }
  return out;
}

// Moves a random `fraction` of O out of the training mask. Returns the
// held-out pairs (empty when fraction is 0 or O is too small).
std::vector<PairIndex> HoldOut(RatingDataset& train, double fraction,
                               Rng& rng) {
  std::vector<PairIndex> observed = ObservedPairs(train);
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(observed.size())));
  if (count == 0 || count == observed.size()) return {};
  Shuffle(std::span<PairIndex>(observed), rng);
  observed.resize(count);
  std::sort(observed.begin(), observed.end(),
            [](const PairIndex& a, const PairIndex& b) {
              return a.user != b.user ? a.user < b.user : a.item < b.item;
            });
  for (const auto& p : observed) train.observed_mask(p.user, p.item) = 0;
  return observed;
}

// Self-normalized IPS mean of the (surrogate) loss over held-out pairs.
double ValidationLoss(const FactorModel& model, const RatingDataset& full,
                      std::span<const PairIndex> pairs,
                      const PropensityMatrix* p_hat, const ErrorParams& rho,
                      const LossKind& loss) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& p : pairs) {
    const double w = p_hat == nullptr ? 1.0 : 1.0 / (*p_hat)(p.user, p.item);
    const double f = model.Predict(p.user, p.item);
    const int r = full.observed_ratings(p.user, p.item) >= 0.5 ? 1 : 0;
    num += w * SurrogateLoss(loss, f, r, rho);
    den += w;
  }
  return num / den;
}

bool AllScoresFinite(const FactorParams& params) {
  for (std::size_t u = 0; u < params.n_users(); ++u) {
    for (std::size_t i = 0; i < params.n_items(); ++i) {
      if (!std::isfinite(params.Score(u, i))) return false;
    }
  }
  return true;
}

void CheckFinite(double value, std::size_t epoch, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << what << " became non-finite at epoch " << epoch;
    throw TrainingDivergence(msg.str(), epoch);
  }
}

}  // namespace

std::string_view PretrainMethodName(PretrainMethod method) {
  switch (method) {
    case PretrainMethod::kNaive:
      return "naive";
    case PretrainMethod::kIps:
      return "ips";
    case PretrainMethod::kDr:
      return "dr";
  }
  return "?";
}

std::optional<PretrainMethod> ParsePretrainMethod(std::string_view name) {
  if (name == "naive") return PretrainMethod::kNaive;
  if (name == "ips") return PretrainMethod::kIps;
  if (name == "dr") return PretrainMethod::kDr;
  return std::nullopt;
}

void ValidateAltTrainConfig(const AltTrainConfig& config) {
  if (config.dim == 0) throw std::invalid_argument("dim must be positive");
  if (config.k_extreme == 0) {
    throw std::invalid_argument("k_extreme must be positive");
  }
  if (!(config.validation_fraction >= 0.0 &&
        config.validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in [0, 1)");
  }
  if (!(config.propensity_floor > 0.0 && config.propensity_floor <= 1.0)) {
    throw std::invalid_argument("propensity_floor must be in (0, 1]");
  }
  ValidateSgdConfig(config.prediction);
  ValidateSgdConfig(config.imputation);
  ValidateSgdConfig(config.propensity);
  ValidateSgdConfig(config.pretrain);
  if (config.prediction.batch_size == 0 || config.imputation.batch_size == 0) {
    throw std::invalid_argument(
        "prediction and imputation batch sizes must be positive");
  }
}

void WriteTraceCsv(std::ostream& out, const TrainTrace& trace) {
  const auto old_precision = out.precision(17);
  out << "loop,rho01_hat,rho10_hat,objective,val_metric,clamped\n";
  for (const auto& r : trace.records) {
    out << r.loop << ',' << r.rho01_hat << ',' << r.rho10_hat << ','
        << r.objective << ',';
    if (std::isnan(r.val_metric)) {
      out << "nan";
    } else {
      out << r.val_metric;
    }
    out << ',' << (r.clamped ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

FactorModel TrainSupervised(const RatingDataset& dataset,
                            const PropensityMatrix* p_hat,
                            const SgdConfig& config, std::size_t dim,
                            const LossKind& loss, double validation_fraction) {
  ValidateSgdConfig(config);
  Rng root(config.seed);
  Rng init = root.Fork();
  Rng sampler = root.Fork();
  FactorModel model{FactorParams::Random(dataset.n_users, dataset.n_items, dim,
                                         init)};

  RatingDataset train = dataset;
  std::vector<PairIndex> held_out;
  if (config.patience > 0) held_out = HoldOut(train, validation_fraction, sampler);
  std::vector<PairIndex> pairs = ObservedPairs(train);
  if (pairs.empty() || config.max_epochs == 0) return model;

  const std::size_t batch =
      config.batch_size == 0 ? pairs.size()
                             : std::min(config.batch_size, pairs.size());
  Optimizer optimizer(config, model.params.flat().size());
  FactorParams grad(dataset.n_users, dataset.n_items, dim);
  FactorModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Shuffle(std::span<PairIndex>(pairs), sampler);
    for (std::size_t start = 0; start < pairs.size(); start += batch) {
      const std::size_t len = std::min(batch, pairs.size() - start);
      const std::span<const PairIndex> chunk(pairs.data() + start, len);
      for (const auto& [u, i] : chunk) {
        CheckFinite(model.params.Score(u, i), epoch, "score");
      }
      SupervisedGradient(model.params, chunk, train, p_hat, loss,
                         config.weight_decay, grad);
      for (double g : grad.flat()) CheckFinite(g, epoch, "gradient");
      optimizer.Step(model.params.flat(), grad.flat());
      for (double v : model.params.flat()) CheckFinite(v, epoch, "parameter");
    }
    if (!held_out.empty()) {
      const double val =
          ValidationLoss(model, dataset, held_out, p_hat, ErrorParams(), loss);
      CheckFinite(val, epoch, "validation loss");
      if (val < best_val) {
        best_val = val;
        best = model;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }
  return held_out.empty() ? model : best;
}

AltTrainResult AlternatingDenoiseTrain(const RatingDataset& dataset,
                                       const PropensityMatrix& p_hat,
                                       const NoisyRateModel* noisy,
                                       const AltTrainConfig& config) {
  ValidateAltTrainConfig(config);
  if (!config.freeze_rho && noisy == nullptr) {
    throw std::invalid_argument("a noisy-rate model is required unless rho "
                                "is frozen");
  }
  if (!p_hat.values().SameShape(dataset.n_users, dataset.n_items)) {
    throw std::invalid_argument("propensity matrix shape mismatch");
  }
  Rng root(config.seed);
  Rng init = root.Fork();
  Rng sampler = root.Fork();
  AltTrainResult result{
      FactorModel{FactorParams::Random(dataset.n_users, dataset.n_items,
                                       config.dim, init)},
      ImputationModel{FactorParams::Random(dataset.n_users, dataset.n_items,
                                           config.dim, init)},
      {}};
  if (config.outer_loops == 0) return result;

  RatingDataset train = dataset;
  std::vector<PairIndex> held_out;
  if (config.prediction.patience > 0) {
    held_out = HoldOut(train, config.validation_fraction, sampler);
  }
  const std::vector<PairIndex> observed = ObservedPairs(train);
  if (observed.empty()) {
    throw std::invalid_argument("alternating training needs observed pairs");
  }

  const std::size_t n_items = dataset.n_items;
  const std::size_t n_pairs = dataset.num_pairs();
  Optimizer pred_opt(config.prediction, result.prediction.params.flat().size());
  Optimizer imp_opt(config.imputation, result.imputation.params.flat().size());
  ErrorParams rho_hat = config.rho_init;

  std::vector<PairIndex> batch(config.prediction.batch_size);
  std::vector<double> e_bar(batch.size());
  std::vector<PairIndex> imp_batch(config.imputation.batch_size);
  std::vector<double> imp_preds(imp_batch.size());

  AltTrainResult best = result;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t loop = 1; loop <= config.outer_loops; ++loop) {
    for (std::size_t step = 0; step < config.steps_prediction; ++step) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const std::size_t k = sampler.UniformIndex(n_pairs);
        batch[b] = {k / n_items, k % n_items};
        e_bar[b] = result.imputation.Predict(batch[b].user, batch[b].item);
      }
      try {
        SgdStepSurrogate(result.prediction, {batch, e_bar}, train, p_hat,
                         rho_hat, config.loss, config.prediction, pred_opt);
      } catch (const TrainingDivergence&) {
        std::ostringstream msg;
        msg << "prediction gradient became non-finite at loop " << loop;
        throw AlternatingDivergence(msg.str(), loop, result.trace);
      }
    }

    if (!AllScoresFinite(result.prediction.params)) {
      std::ostringstream msg;
      msg << "prediction scores became non-finite at loop " << loop;
      throw AlternatingDivergence(msg.str(), loop, result.trace);
    }
    const PredictionMatrix preds = result.prediction.PredictAll();
    TraceRecord record;
    record.loop = loop;
    if (!config.freeze_rho) {
      const IdentifiedRates rates =
          RatesAtExtremes(*noisy, preds.values(), config.k_extreme);
      rho_hat = rates.rates;
      record.clamped = rates.clamped;
      if (rates.clamped) {
        std::ostringstream msg;
        msg << "loop " << loop << ": refreshed rho clamped into the valid "
            << "region";
        result.trace.warnings.push_back(msg.str());
      }
    }

    for (std::size_t step = 0; step < config.steps_imputation; ++step) {
      for (std::size_t b = 0; b < imp_batch.size(); ++b) {
        imp_batch[b] = observed[sampler.UniformIndex(observed.size())];
        imp_preds[b] = preds(imp_batch[b].user, imp_batch[b].item);
      }
      try {
        SgdStepImputation(result.imputation, {imp_batch, imp_preds}, train,
                          p_hat, rho_hat, config.loss, config.imputation,
                          imp_opt);
      } catch (const TrainingDivergence&) {
        std::ostringstream msg;
        msg << "imputation gradient became non-finite at loop " << loop;
        throw AlternatingDivergence(msg.str(), loop, result.trace);
      }
    }

    if (!AllScoresFinite(result.imputation.params)) {
      std::ostringstream msg;
      msg << "imputed errors became non-finite at loop " << loop;
      throw AlternatingDivergence(msg.str(), loop, result.trace);
    }
    const ImputationMatrix imputed = result.imputation.PredictAll();
    EstimatorInputs in{&train, &preds, &p_hat, &imputed, rho_hat, config.loss};
    record.rho01_hat = rho_hat.rho01();
    record.rho10_hat = rho_hat.rho10();
    record.objective = EstimateOmeDr(in);
    if (!std::isfinite(record.objective)) {
      result.trace.records.push_back(record);
      std::ostringstream msg;
      msg << "OME-DR objective became non-finite at loop " << loop;
      throw AlternatingDivergence(msg.str(), loop, result.trace);
    }
    record.val_metric =
        held_out.empty() ? kNaN
                         : ValidationLoss(result.prediction, dataset, held_out,
                                          &p_hat, rho_hat, config.loss);
    result.trace.records.push_back(record);

    if (!held_out.empty()) {
      if (record.val_metric < best_val) {
        best_val = record.val_metric;
        best.prediction = result.prediction;
        best.imputation = result.imputation;
        since_best = 0;
      } else if (++since_best >= config.prediction.patience) {
        result.trace.warnings.push_back("early stop at loop " +
                                        std::to_string(loop));
        break;
      }
    }
  }
  if (!held_out.empty()) {
    result.prediction = std::move(best.prediction);
    result.imputation = std::move(best.imputation);
  }
  return result;
}

AltTrainResult TrainJointLearning(const RatingDataset& dataset,
                                  const PropensityMatrix& p_hat,
                                  const AltTrainConfig& config) {
  AltTrainConfig frozen = config;
  frozen.freeze_rho = true;
  frozen.rho_init = ErrorParams();
  return AlternatingDenoiseTrain(dataset, p_hat, nullptr, frozen);
}

FactorModel PretrainNoisyModel(const RatingDataset& dataset,
                               PretrainMethod method,
                               const PropensityMatrix& p_hat,
                               const AltTrainConfig& config) {
  switch (method) {
    case PretrainMethod::kNaive:
      return TrainSupervised(dataset, nullptr, config.pretrain, config.dim,
                             config.loss, config.validation_fraction);
    case PretrainMethod::kIps:
      return TrainSupervised(dataset, &p_hat, config.pretrain, config.dim,
                             config.loss, config.validation_fraction);
    case PretrainMethod::kDr: {
      AltTrainConfig dr = config;
      dr.prediction = config.pretrain;
      dr.prediction.batch_size = std::max<std::size_t>(1, dr.prediction.batch_size);
      dr.outer_loops = config.pretrain.max_epochs;
      // One loop covers D once in expectation.
      dr.steps_prediction = std::max<std::size_t>(
          1, dataset.num_pairs() / dr.prediction.batch_size);
      return TrainJointLearning(dataset, p_hat, dr).prediction;
    }
  }
  throw std::invalid_argument("unknown pretrain method");
}

OmeAltResult TrainOmeAlt(const RatingDataset& dataset,
                         const AltTrainConfig& config,
                         const PropensityMatrix* p_hat) {
  ValidateAltTrainConfig(config);
  OmeAltResult out;
  if (p_hat != nullptr) {
    out.p_hat = *p_hat;
  } else {
    out.p_hat = TrainPropensity(dataset, config.propensity)
                    .PredictAll(config.propensity_floor);
  }
  out.noisy_model =
      PretrainNoisyModel(dataset, config.pretrain_method, out.p_hat, config);
  const NoisyRateModel noisy(out.noisy_model.PredictAll().values());
  out.alternating = AlternatingDenoiseTrain(dataset, out.p_hat, &noisy, config);
  return out;
}

}  // namespace debiasrec
