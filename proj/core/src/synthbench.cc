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

#include "debiasrec/synthbench.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace debiasrec {
namespace {

struct KindName {
  PredictionKind kind;
  std::string_view name;
};

constexpr KindName kPredictionKinds[] = {
    {PredictionKind::kRotate, "ROTATE"}, {PredictionKind::kSkew, "SKEW"},
    {PredictionKind::kCrs, "CRS"},       {PredictionKind::kOne, "ONE"},
    {PredictionKind::kThree, "THREE"},   {PredictionKind::kFive, "FIVE"},
};

// Index into kGammaLevels, or -1.
int LevelIndex(double gamma) {
  for (std::size_t k = 0; k < kGammaLevels.size(); ++k) {
    if (std::abs(gamma - kGammaLevels[k]) < 1e-9) return static_cast<int>(k);
  }
  return -1;
}

void Warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings != nullptr) warnings->push_back(std::move(message));
}

}  // namespace

std::string_view PredictionKindName(PredictionKind kind) {
  for (const auto& entry : kPredictionKinds) {
    if (entry.kind == kind) return entry.name;
  }
  return "?";
}

std::optional<PredictionKind> ParsePredictionKind(std::string_view name) {
  for (const auto& entry : kPredictionKinds) {
    if (entry.name == name) return entry.kind;
  }
  return std::nullopt;
}

std::vector<PredictionKind> AllPredictionKinds() {
  std::vector<PredictionKind> out;
  for (const auto& entry : kPredictionKinds) out.push_back(entry.kind);
  return out;
}

std::string_view BetaModeName(BetaMode mode) {
  switch (mode) {
    case BetaMode::kNone:
      return "none";
    case BetaMode::kPerPair:
      return "per_pair";
    case BetaMode::kPerRun:
      return "per_run";
  }
  return "?";
}

std::optional<BetaMode> ParseBetaMode(std::string_view name) {
  if (name == "none") return BetaMode::kNone;
  if (name == "per_pair") return BetaMode::kPerPair;
  if (name == "per_run") return BetaMode::kPerRun;
  return std::nullopt;
}

std::vector<std::string> ValidateBenchmarkSpec(const BenchmarkSpec& spec) {
  std::vector<std::string> out;
  if (spec.n_users == 0) out.push_back("n_users must be positive");
  if (spec.n_items == 0) out.push_back("n_items must be positive");
  double total = 0.0;
  bool negative = false;
  for (double p : spec.gamma_proportions) {
    total += p;
    negative |= !(p >= 0.0);
  }
  if (negative) out.push_back("gamma_proportions entries must be >= 0");
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "gamma_proportions must sum to 1 (got " << total << ")";
    out.push_back(msg.str());
  }
  if (!(spec.p_base > 0.0) || !std::isfinite(spec.p_base)) {
    out.push_back("p_base must be positive");
  }
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) {
    out.push_back("alpha must be in (0, 1]");
  }
  if (!(spec.propensity_floor > 0.0 && spec.propensity_floor <= 1.0)) {
    out.push_back("propensity_floor must be in (0, 1]");
  }
  return out;
}

GammaMatrix BuildGamma(const std::array<double, 5>& proportions,
                       const RealMatrix& scores) {
  const std::size_t n = scores.size();
  const auto& v = scores.values();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

  std::array<std::size_t, 5> bound{};
  double cumulative = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    cumulative += proportions[k];
    bound[k] = k == 4 ? n
                      : static_cast<std::size_t>(std::llround(
                            static_cast<double>(n) * cumulative));
    bound[k] = std::min(bound[k], n);
  }

  GammaMatrix out{RealMatrix(scores.rows(), scores.cols()),
                  Matrix<int>(scores.rows(), scores.cols())};
  std::size_t level = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    while (level < 4 && pos >= bound[level]) ++level;
    out.gamma[order[pos]] = kGammaLevels[level];
    out.five_scale[order[pos]] = static_cast<int>(level) + 1;
  }
  return out;
}

GammaMatrix GammaFromSupplied(const RealMatrix& gamma) {
  GammaMatrix out{RealMatrix(gamma.rows(), gamma.cols()),
                  Matrix<int>(gamma.rows(), gamma.cols())};
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    const int level = LevelIndex(gamma[k]);
    if (level < 0) {
      std::ostringstream msg;
      msg << "gamma entry " << gamma[k] << " at flat index " << k
          << " is not one of 0.1, 0.3, 0.5, 0.7, 0.9";
      throw std::invalid_argument(msg.str());
    }
    out.gamma[k] = kGammaLevels[level];
    out.five_scale[k] = level + 1;
  }
  return out;
}

RealMatrix CompleteRatingsMf(std::span<const RatingTriple> triples,
                             std::size_t n_users, std::size_t n_items,
                             const CompletionConfig& config) {
  ValidateSgdConfig(config.sgd);
  for (const auto& t : triples) {
    if (t.user >= n_users || t.item >= n_items || !std::isfinite(t.rating)) {
      throw std::invalid_argument("rating triple outside the matrix");
    }
  }
  Rng rng(config.sgd.seed);
  FactorParams params(n_users, n_items, config.dim);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (auto& x : params.user_emb(u)) x = rng.Normal(0.0, 0.1);
  }

  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = config.sgd.learning_rate;
  const double wd = config.sgd.weight_decay;
  std::vector<double> scratch(config.dim);
  for (std::size_t epoch = 1; epoch <= config.sgd.max_epochs; ++epoch) {
    Shuffle(std::span<std::size_t>(order), rng);
    double sse = 0.0;
    for (std::size_t idx : order) {
      const RatingTriple& t = triples[idx];
      const double err = params.Score(t.user, t.item) - t.rating;
      sse += err * err;
      auto pu = params.user_emb(t.user);
      auto qi = params.item_emb(t.item);
      for (std::size_t k = 0; k < config.dim; ++k) {
        scratch[k] = pu[k];
        pu[k] -= lr * (2.0 * err * qi[k] + wd * pu[k]);
        qi[k] -= lr * (2.0 * err * scratch[k] + wd * qi[k]);
      }
      params.user_bias(t.user) -= lr * 2.0 * err;
      params.item_bias(t.item) -= lr * 2.0 * err;
      params.global_bias() -= lr * 2.0 * err;
    }
    if (!std::isfinite(sse)) {
      std::ostringstream msg;
      msg << "rating completion diverged at epoch " << epoch;
      throw TrainingDivergence(msg.str(), epoch);
    }
  }

  RealMatrix out(n_users, n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) out(u, i) = params.Score(u, i);
  }
  return out;
}

RealMatrix LowRankScores(std::size_t n_users, std::size_t n_items,
                         std::size_t rank, Rng& rng) {
  if (rank == 0) throw std::invalid_argument("rank must be positive");
  RealMatrix left(n_users, rank);
  RealMatrix right(n_items, rank);
  for (auto& x : left.flat()) x = rng.Normal();
  for (auto& x : right.flat()) x = rng.Normal();
  RealMatrix out(n_users, n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < rank; ++k) s += left(u, k) * right(i, k);
      out(u, i) = s;
    }
  }
  return out;
}

PredictionMatrix BuildPredictionMatrix(PredictionKind kind,
                                       const RealMatrix& gamma, Rng& rng,
                                       std::vector<std::string>* warnings) {
  RealMatrix pred(gamma.rows(), gamma.cols());
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (LevelIndex(gamma[k]) < 0) {
      throw std::invalid_argument("gamma contains a value outside the levels");
    }
  }
  switch (kind) {
    case PredictionKind::kRotate:
      for (std::size_t k = 0; k < gamma.size(); ++k) {
        pred[k] = LevelIndex(gamma[k]) == 0 ? 0.9 : gamma[k] - 0.2;
      }
      break;
    case PredictionKind::kSkew:
      for (std::size_t k = 0; k < gamma.size(); ++k) {
        const double draw = rng.Normal(gamma[k], (1.0 - gamma[k]) / 2.0);
        pred[k] = std::clamp(draw, 0.1, 0.9);
      }
      break;
    case PredictionKind::kCrs:
      for (std::size_t k = 0; k < gamma.size(); ++k) {
        pred[k] = gamma[k] <= 0.6 ? 0.2 : 0.6;
      }
      break;
    case PredictionKind::kOne:
    case PredictionKind::kThree:
    case PredictionKind::kFive: {
      const int source_level = kind == PredictionKind::kOne     ? 0
                               : kind == PredictionKind::kThree ? 1
                                                                : 2;
      std::size_t target = 0;
      for (std::size_t k = 0; k < gamma.size(); ++k) {
        pred[k] = gamma[k];
        if (LevelIndex(gamma[k]) == 4) ++target;
      }
      // Reservoir sampling (algorithm R) over the source-level cells in
      // row-major order.
      std::vector<std::size_t> reservoir;
      reservoir.reserve(target);
      std::size_t seen = 0;
      for (std::size_t k = 0; k < gamma.size(); ++k) {
        if (LevelIndex(gamma[k]) != source_level) continue;
        ++seen;
        if (reservoir.size() < target) {
          reservoir.push_back(k);
        } else if (target > 0) {
          const std::uint64_t j = rng.UniformIndex(seen);
          if (j < target) reservoir[j] = k;
        }
      }
      if (reservoir.size() < target) {
        std::ostringstream msg;
        msg << PredictionKindName(kind) << ": only " << reservoir.size()
            << " cells at level " << kGammaLevels[source_level] << ", "
            << target << " requested; flipped all of them";
        Warn(warnings, msg.str());
      }
      for (std::size_t k : reservoir) pred[k] = 0.9;
      break;
    }
  }
  return PredictionMatrix(std::move(pred));
}

RealMatrix AssignPropensities(double p_base, double alpha,
                              const Matrix<int>& five_scale,
                              std::vector<std::string>* warnings) {
  RealMatrix p(five_scale.rows(), five_scale.cols());
  bool clipped = false;
  for (std::size_t k = 0; k < five_scale.size(); ++k) {
    const int r = five_scale[k];
    if (r < 1 || r > 5) {
      throw std::invalid_argument("five-scale rating outside 1..5");
    }
    const double value = p_base * std::pow(alpha, std::min(4, 6 - r));
    if (value > 1.0) clipped = true;
    p[k] = std::min(value, 1.0);
  }
  if (clipped) Warn(warnings, "propensities above 1 were clipped to 1");
  return p;
}

RealMatrix PerturbPropensities(const RealMatrix& p_true, double p_e,
                               const RealMatrix& beta, double floor) {
  if (!(p_e > 0.0)) {
    throw std::invalid_argument("p_e must be positive (no observed pairs?)");
  }
  if (!beta.SameShape(p_true)) {
    throw std::invalid_argument("beta matrix shape mismatch");
  }
  RealMatrix out(p_true.rows(), p_true.cols());
  for (std::size_t k = 0; k < p_true.size(); ++k) {
    if (beta[k] == 0.0) {
      out[k] = std::max(p_true[k], floor);
      continue;
    }
    const double inv = (1.0 - beta[k]) / p_true[k] + beta[k] / p_e;
    out[k] = std::max(1.0 / inv, floor);
  }
  return out;
}

RealMatrix SamplePerturbedPropensities(const RealMatrix& p_true,
                                       const BinaryMatrix& observed_mask,
                                       BetaMode mode, double floor, Rng& rng) {
  std::size_t observed = 0;
  for (auto o : observed_mask.flat()) observed += (o != 0);
  const double p_e =
      static_cast<double>(observed) / static_cast<double>(observed_mask.size());
  RealMatrix beta(p_true.rows(), p_true.cols(), 0.0);
  if (mode == BetaMode::kPerPair) {
    for (auto& b : beta.flat()) b = rng.Uniform();
  } else if (mode == BetaMode::kPerRun) {
    const double b = rng.Uniform();
    for (auto& x : beta.flat()) x = b;
  }
  return PerturbPropensities(p_true, p_e, beta, floor);
}

RatingDataset BenchmarkInstance::ToDataset() const {
  RatingDataset d;
  d.n_users = gamma.rows();
  d.n_items = gamma.cols();
  d.observed_mask = observed_mask;
  d.observed_ratings = observed_ratings;
  d.true_ratings = true_ratings;
  return d;
}

PropensityMatrix BenchmarkInstance::TruePropensities() const {
  return PropensityMatrix(p_true, spec.propensity_floor);
}

PropensityMatrix BenchmarkInstance::PerturbedPropensities() const {
  return PropensityMatrix(p_hat_perturbed, spec.propensity_floor);
}

BenchmarkInstance SampleInstance(const BenchmarkSpec& spec,
                                 const RealMatrix& source) {
  if (auto violations = ValidateBenchmarkSpec(spec); !violations.empty()) {
    throw std::invalid_argument("invalid benchmark spec: " + violations[0]);
  }
  if (!source.SameShape(spec.n_users, spec.n_items)) {
    throw std::invalid_argument("score/gamma matrix shape does not match spec");
  }
  BenchmarkInstance inst;
  inst.spec = spec;
  GammaMatrix g = spec.gamma_source == GammaSource::kQuantile
                      ? BuildGamma(spec.gamma_proportions, source)
                      : GammaFromSupplied(source);
  inst.gamma = std::move(g.gamma);
  inst.five_scale = std::move(g.five_scale);

  Rng rng(spec.seed);
  inst.prediction_matrix =
      BuildPredictionMatrix(spec.pred_kind, inst.gamma, rng, &inst.warnings);
  inst.p_true = AssignPropensities(spec.p_base, spec.alpha, inst.five_scale,
                                   &inst.warnings);

  const std::size_t n = spec.n_users, m = spec.n_items;
  inst.true_ratings = RealMatrix(n, m);
  inst.observed_ratings = RealMatrix(n, m);
  inst.observed_mask = BinaryMatrix(n, m);
  const double rho01 = spec.rho.rho01();
  const double rho10 = spec.rho.rho10();
  for (std::size_t k = 0; k < n * m; ++k) {
    const bool r_true = rng.Bernoulli(inst.gamma[k]);
    const bool observed = rng.Bernoulli(inst.p_true[k]);
    const double flip = rng.Uniform();
    const bool r = r_true ? !(flip < rho01) : (flip < rho10);
    inst.true_ratings[k] = r_true ? 1.0 : 0.0;
    inst.observed_mask[k] = observed ? 1 : 0;
    inst.observed_ratings[k] = r ? 1.0 : 0.0;
  }
  inst.p_hat_perturbed =
      SamplePerturbedPropensities(inst.p_true, inst.observed_mask,
                                  spec.beta_mode, spec.propensity_floor, rng);
  return inst;
}

}  // namespace debiasrec
