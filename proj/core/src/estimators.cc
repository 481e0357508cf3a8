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

#include "debiasrec/estimators.h"

#include <cmath>
#include <sstream>

namespace debiasrec {
namespace {

struct KindInfo {
  EstimatorKind kind;
  std::string_view name;
  bool propensities;
  bool imputation;
  bool error_params;
};

constexpr KindInfo kKinds[] = {
    {EstimatorKind::kNaive, "naive", false, false, false},
    {EstimatorKind::kEib, "eib", false, true, false},
    {EstimatorKind::kIps, "ips", true, false, false},
    {EstimatorKind::kDr, "dr", true, true, false},
    {EstimatorKind::kOmeEib, "ome_eib", false, true, true},
    {EstimatorKind::kOmeIps, "ome_ips", true, false, true},
    {EstimatorKind::kOmeDr, "ome_dr", true, true, true},
};

const KindInfo& Info(EstimatorKind kind) {
  for (const auto& info : kKinds) {
    if (info.kind == kind) return info;
  }
  throw std::invalid_argument("unknown estimator kind");
}

void CheckShape(const char* what, std::size_t rows, std::size_t cols,
                const RatingDataset& d) {
  if (rows != d.n_users || cols != d.n_items) {
    std::ostringstream msg;
    msg << what << " has shape " << rows << "x" << cols << ", dataset is "
        << d.n_users << "x" << d.n_items;
    throw std::invalid_argument(msg.str());
  }
}

// Validates the components needed by `kind` and returns the dataset.
const RatingDataset& Require(const EstimatorInputs& in, EstimatorKind kind) {
  const KindInfo& info = Info(kind);
  if (in.dataset == nullptr) throw MissingComponentError("dataset required");
  if (in.predictions == nullptr) {
    throw MissingComponentError("predictions required");
  }
  const RatingDataset& d = *in.dataset;
  if (d.num_pairs() == 0) throw std::invalid_argument("dataset is empty");
  CheckShape("predictions", in.predictions->rows(), in.predictions->cols(), d);
  if (info.propensities) {
    if (in.p_hat == nullptr) {
      throw MissingComponentError("propensities required");
    }
    CheckShape("propensities", in.p_hat->rows(), in.p_hat->cols(), d);
  }
  if (info.imputation) {
    if (in.e_bar == nullptr) {
      throw MissingComponentError("imputed errors required");
    }
    CheckShape("imputed errors", in.e_bar->rows(), in.e_bar->cols(), d);
  }
  if (info.error_params && !in.rho_hat.has_value()) {
    throw MissingComponentError("error rates required");
  }
  return d;
}

int Label(double r) { return r != 0.0 ? 1 : 0; }

// Observed error at (u, i): l(f, r) for the plain family, e~ for OME.
double CellError(const EstimatorInputs& in, std::size_t u, std::size_t i,
                 bool ome) {
  const double f = (*in.predictions)(u, i);
  const int r = Label(in.dataset->observed_ratings(u, i));
  return ome ? SurrogateLoss(in.loss, f, r, *in.rho_hat)
             : PointLoss(in.loss, f, r);
}

double ImputationBased(const EstimatorInputs& in, EstimatorKind kind,
                       bool ome) {
  const RatingDataset& d = Require(in, kind);
  double sum = 0.0;
  for (std::size_t u = 0; u < d.n_users; ++u) {
    for (std::size_t i = 0; i < d.n_items; ++i) {
      const double o = d.observed_mask(u, i);
      const double observed = o != 0.0 ? CellError(in, u, i, ome) : 0.0;
      sum += (1.0 - o) * (*in.e_bar)(u, i) + o * observed;
    }
  }
  return sum / static_cast<double>(d.num_pairs());
}

double PropensityWeighted(const EstimatorInputs& in, EstimatorKind kind,
                          bool ome) {
  const RatingDataset& d = Require(in, kind);
  double sum = 0.0;
  for (std::size_t u = 0; u < d.n_users; ++u) {
    for (std::size_t i = 0; i < d.n_items; ++i) {
      const double o = d.observed_mask(u, i);
      const double observed = o != 0.0 ? CellError(in, u, i, ome) : 0.0;
      sum += o * observed / (*in.p_hat)(u, i);
    }
  }
  return sum / static_cast<double>(d.num_pairs());
}

double DoublyRobust(const EstimatorInputs& in, EstimatorKind kind, bool ome) {
  const RatingDataset& d = Require(in, kind);
  double sum = 0.0;
  for (std::size_t u = 0; u < d.n_users; ++u) {
    for (std::size_t i = 0; i < d.n_items; ++i) {
      const double o = d.observed_mask(u, i);
      const double p = (*in.p_hat)(u, i);
      const double observed = o != 0.0 ? CellError(in, u, i, ome) : 0.0;
      sum += (1.0 - o / p) * (*in.e_bar)(u, i) + o * observed / p;
    }
  }
  return sum / static_cast<double>(d.num_pairs());
}

}  // namespace

std::string_view EstimatorName(EstimatorKind kind) { return Info(kind).name; }

std::optional<EstimatorKind> ParseEstimatorKind(std::string_view name) {
  for (const auto& info : kKinds) {
    if (info.name == name) return info.kind;
  }
  return std::nullopt;
}

std::vector<EstimatorKind> AllEstimatorKinds() {
  std::vector<EstimatorKind> out;
  for (const auto& info : kKinds) out.push_back(info.kind);
  return out;
}

bool NeedsPropensities(EstimatorKind kind) { return Info(kind).propensities; }
bool NeedsImputation(EstimatorKind kind) { return Info(kind).imputation; }
bool NeedsErrorParams(EstimatorKind kind) { return Info(kind).error_params; }

double TrueInaccuracy(const PredictionMatrix& predictions,
                      const RatingDataset& dataset, const LossKind& loss) {
  if (!dataset.true_ratings.has_value()) {
    throw MissingComponentError("true ratings required");
  }
  const RealMatrix& truth = *dataset.true_ratings;
  CheckShape("predictions", predictions.rows(), predictions.cols(), dataset);
  CheckShape("true ratings", truth.rows(), truth.cols(), dataset);
  if (dataset.num_pairs() == 0) throw std::invalid_argument("dataset is empty");
  double sum = 0.0;
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) {
      sum += PointLoss(loss, predictions(u, i), Label(truth(u, i)));
    }
  }
  return sum / static_cast<double>(dataset.num_pairs());
}

double EstimateNaive(const EstimatorInputs& in) {
  const RatingDataset& d = Require(in, EstimatorKind::kNaive);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t u = 0; u < d.n_users; ++u) {
    for (std::size_t i = 0; i < d.n_items; ++i) {
      if (!d.observed(u, i)) continue;
      sum += CellError(in, u, i, /*ome=*/false);
      ++count;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("naive estimator needs at least one observed pair");
  }
  return sum / static_cast<double>(count);
}

double EstimateEib(const EstimatorInputs& in) {
  return ImputationBased(in, EstimatorKind::kEib, false);
}

double EstimateIps(const EstimatorInputs& in) {
  return PropensityWeighted(in, EstimatorKind::kIps, false);
}

double EstimateDr(const EstimatorInputs& in) {
  return DoublyRobust(in, EstimatorKind::kDr, false);
}

double EstimateOmeEib(const EstimatorInputs& in) {
  return ImputationBased(in, EstimatorKind::kOmeEib, true);
}

double EstimateOmeIps(const EstimatorInputs& in) {
  return PropensityWeighted(in, EstimatorKind::kOmeIps, true);
}

double EstimateOmeDr(const EstimatorInputs& in) {
  return DoublyRobust(in, EstimatorKind::kOmeDr, true);
}

double Estimate(EstimatorKind kind, const EstimatorInputs& in) {
  switch (kind) {
    case EstimatorKind::kNaive:
      return EstimateNaive(in);
    case EstimatorKind::kEib:
      return EstimateEib(in);
    case EstimatorKind::kIps:
      return EstimateIps(in);
    case EstimatorKind::kDr:
      return EstimateDr(in);
    case EstimatorKind::kOmeEib:
      return EstimateOmeEib(in);
    case EstimatorKind::kOmeIps:
      return EstimateOmeIps(in);
    case EstimatorKind::kOmeDr:
      return EstimateOmeDr(in);
  }
  throw std::invalid_argument("unknown estimator kind");
}

BiasWeights OmeDrBiasWeights(const ErrorParams& rho_true,
                             const ErrorParams& rho_hat) {
  const double denom = rho_hat.denominator();
  BiasWeights w;
  w.w11 = (1.0 - rho_true.rho01() - rho_hat.rho10()) / denom;
  w.w01 = (rho_true.rho01() - rho_hat.rho01()) / denom;
  w.w10 = (rho_true.rho10() - rho_hat.rho10()) / denom;
  w.w00 = (1.0 - rho_hat.rho01() - rho_true.rho10()) / denom;
  return w;
}

double SignedBiasOmeDr(const BiasOracleInputs& in) {
  if (in.dataset == nullptr || in.predictions == nullptr ||
      in.p_true == nullptr || in.p_hat == nullptr || in.e_bar == nullptr) {
    throw MissingComponentError(
        "bias oracle needs dataset, predictions, p_true, p_hat and e_bar");
  }
  const RatingDataset& d = *in.dataset;
  if (!d.true_ratings.has_value()) {
    throw MissingComponentError("true ratings required");
  }
  CheckShape("predictions", in.predictions->rows(), in.predictions->cols(), d);
  CheckShape("p_true", in.p_true->rows(), in.p_true->cols(), d);
  CheckShape("p_hat", in.p_hat->rows(), in.p_hat->cols(), d);
  CheckShape("imputed errors", in.e_bar->rows(), in.e_bar->cols(), d);
  if (d.num_pairs() == 0) throw std::invalid_argument("dataset is empty");

  const BiasWeights w = OmeDrBiasWeights(in.rho_true, in.rho_hat);
  double sum = 0.0;
  for (std::size_t u = 0; u < d.n_users; ++u) {
    for (std::size_t i = 0; i < d.n_items; ++i) {
      const double f = (*in.predictions)(u, i);
      const double p = (*in.p_true)(u, i);
      const double ph = (*in.p_hat)(u, i);
      const double loss_pos = PointLoss(in.loss, f, 1);
      const double loss_neg = PointLoss(in.loss, f, 0);
      double term = (1.0 - p / ph) * (*in.e_bar)(u, i);
      if (Label((*d.true_ratings)(u, i)) == 1) {
        term += (p * w.w11 - ph) / ph * loss_pos + p * w.w01 / ph * loss_neg;
      } else {
        term += p * w.w10 / ph * loss_pos + (p * w.w00 - ph) / ph * loss_neg;
      }
      sum += term;
    }
  }
  return sum / static_cast<double>(d.num_pairs());
}

double BiasOmeDrOracle(const BiasOracleInputs& in) {
  return std::abs(SignedBiasOmeDr(in));
}

double RelativeError(double target, double estimate) {
  if (!(target > 0.0)) {
    std::ostringstream msg;
    msg << "relative error needs a positive target, got " << target;
    throw std::invalid_argument(msg.str());
  }
  return std::abs(target - estimate) / target;
}

ImputationMatrix MeanObservedImputation(const RatingDataset& dataset,
                                        const PredictionMatrix& predictions,
                                        const LossKind& loss,
                                        const std::optional<ErrorParams>& rho) {
  CheckShape("predictions", predictions.rows(), predictions.cols(), dataset);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) {
      if (!dataset.observed(u, i)) continue;
      const int r = Label(dataset.observed_ratings(u, i));
      sum += rho.has_value() ? SurrogateLoss(loss, predictions(u, i), r, *rho)
                             : PointLoss(loss, predictions(u, i), r);
      ++count;
    }
  }
  const double mean = count == 0 ? 0.0 : sum / static_cast<double>(count);
  return ImputationMatrix::Constant(dataset.n_users, dataset.n_items, mean);
}

}  // namespace debiasrec
