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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "debiasrec/metrics.h"
#include "debiasrec/rng.h"
#include "support/test_support.h"

namespace debiasrec {
namespace {

// r = 1[u . v > 0] for Gaussian rank-2 factors.
RealMatrix LowRankLabels(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<double> u(2 * n), v(2 * m);
  for (double& x : u) x = rng.Normal();
  for (double& x : v) x = rng.Normal();
  RealMatrix r(n, m);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      const double s = u[2 * a] * v[2 * b] + u[2 * a + 1] * v[2 * b + 1];
      r(a, b) = s > 0 ? 1.0 : 0.0;
    }
  }
  return r;
}

// Observes each pair w.p. `p` and flips observed labels with `rho`.
RatingDataset Observe(const RealMatrix& r, double p, const ErrorParams& rho,
                      Rng& rng) {
  RatingDataset d = MakeDataset(r.rows(), r.cols());
  d.true_ratings = r;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!rng.Bernoulli(p)) continue;
    d.observed_mask[k] = 1;
    const double flip = r[k] > 0.5 ? rho.rho10() : rho.rho01();
    d.observed_ratings[k] = rng.Bernoulli(flip) ? 1.0 - r[k] : r[k];
  }
  return d;
}

double AucAgainst(const PredictionMatrix& f, const RealMatrix& r) {
  std::vector<std::uint8_t> labels(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) labels[k] = r[k] > 0.5;
  return Auc(f.values().flat(), labels);
}

AltTrainConfig SmallConfig() {
  AltTrainConfig c;
  c.dim = 4;
  c.outer_loops = 5;
  c.steps_prediction = 5;
  c.steps_imputation = 5;
  c.prediction.batch_size = 64;
  c.imputation.batch_size = 64;
  c.pretrain.max_epochs = 3;
  c.propensity.max_epochs = 5;
  c.seed = 17;
  return c;
}

TEST(AltTrainConfig, ValidationNamesTheField) {
  auto message = [](const AltTrainConfig& c) {
    try {
      ValidateAltTrainConfig(c);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  AltTrainConfig c;
  EXPECT_EQ(message(c), "");
  c.dim = 0;
  EXPECT_NE(message(c).find("dim"), std::string::npos);
  c = AltTrainConfig();
  c.k_extreme = 0;
  EXPECT_NE(message(c).find("k_extreme"), std::string::npos);
  c = AltTrainConfig();
  c.validation_fraction = 1.0;
  EXPECT_NE(message(c).find("validation_fraction"), std::string::npos);
  c = AltTrainConfig();
  c.prediction.batch_size = 0;
  EXPECT_NE(message(c).find("batch"), std::string::npos);
  c = AltTrainConfig();
  c.imputation.learning_rate = -1.0;
  EXPECT_THROW(ValidateAltTrainConfig(c), std::invalid_argument);
}

TEST(PretrainMethod, Names) {
  for (auto m : {PretrainMethod::kNaive, PretrainMethod::kIps,
                 PretrainMethod::kDr}) {
    EXPECT_EQ(ParsePretrainMethod(PretrainMethodName(m)), m);
  }
  EXPECT_FALSE(ParsePretrainMethod("IPS").has_value());
}

TEST(WriteTraceCsv, HeaderAndNan) {
  TrainTrace trace;
  trace.records.push_back(
      {1, 0.25, 0.125, 0.5, std::numeric_limits<double>::quiet_NaN(), true});
  trace.records.push_back({2, 0.0, 0.0, 1.5, 0.75, false});
  std::ostringstream out;
  WriteTraceCsv(out, trace);
  EXPECT_EQ(out.str(),
            "loop,rho01_hat,rho10_hat,objective,val_metric,clamped\n"
            "1,0.25,0.125,0.5,nan,1\n"
            "2,0,0,1.5,0.75,0\n");
}

TEST(TrainSupervised, ZeroEpochsKeepsTheInitialization) {
  Rng rng(1);
  const RatingDataset d = Observe(LowRankLabels(10, 12, rng), 0.5, {}, rng);
  SgdConfig config;
  config.max_epochs = 0;
  config.seed = 3;
  const FactorModel a = TrainSupervised(d, nullptr, config, 4, LossKind());
  Rng root(3);
  Rng init = root.Fork();
  EXPECT_EQ(a.params, FactorParams::Random(10, 12, 4, init));
}

TEST(PretrainNoisyModel, ZeroEpochsPredictsOneHalf) {
  Rng rng(2);
  const RatingDataset d = Observe(LowRankLabels(20, 20, rng), 0.5, {}, rng);
  AltTrainConfig c = SmallConfig();
  c.pretrain.max_epochs = 0;
  for (auto m : {PretrainMethod::kNaive, PretrainMethod::kIps,
                 PretrainMethod::kDr}) {
    const FactorModel h =
        PretrainNoisyModel(d, m, PropensityMatrix::Ones(20, 20), c);
    for (double v : testing::Entries(h.PredictAll().values())) {
      EXPECT_NEAR(v, 0.5, 1e-3);
    }
  }
}

TEST(PretrainNoisyModel, NaiveFitsNoiselessFullObservation) {
  Rng rng(3);
  const RealMatrix r = LowRankLabels(100, 100, rng);
  const RatingDataset d = Observe(r, 1.0, {}, rng);
  AltTrainConfig c;
  c.dim = 8;
  c.pretrain.optimizer = OptimizerKind::kAdam;
  c.pretrain.learning_rate = 0.01;
  c.pretrain.batch_size = 256;
  c.pretrain.max_epochs = 30;
  c.pretrain.weight_decay = 0.0;
  const FactorModel h = PretrainNoisyModel(d, PretrainMethod::kNaive,
                                           PropensityMatrix::Ones(100, 100), c);
  EXPECT_GE(AucAgainst(h.PredictAll(), r), 0.95);
}

TEST(TrainSupervised, EarlyStoppingIsDeterministic) {
  Rng rng(4);
  const RatingDataset d = Observe(LowRankLabels(30, 30, rng), 0.5, {}, rng);
  SgdConfig config;
  config.max_epochs = 50;
  config.patience = 2;
  config.seed = 9;
  const FactorModel a = TrainSupervised(d, nullptr, config, 4, LossKind());
  const FactorModel b = TrainSupervised(d, nullptr, config, 4, LossKind());
  EXPECT_EQ(a.params, b.params);
}

TEST(AlternatingDenoiseTrain, ZeroLoopsGivesEmptyTrace) {
  Rng rng(5);
  const RatingDataset d = Observe(LowRankLabels(10, 10, rng), 0.5, {}, rng);
  AltTrainConfig c = SmallConfig();
  c.outer_loops = 0;
  const NoisyRateModel q(RealMatrix(10, 10, 0.5));
  const AltTrainResult out =
      AlternatingDenoiseTrain(d, PropensityMatrix::Ones(10, 10), &q, c);
  EXPECT_TRUE(out.trace.records.empty());
}

TEST(AlternatingDenoiseTrain, RequiresNoisyModelUnlessFrozen) {
  Rng rng(6);
  const RatingDataset d = Observe(LowRankLabels(10, 10, rng), 0.5, {}, rng);
  const AltTrainConfig c = SmallConfig();
  EXPECT_THROW(
      AlternatingDenoiseTrain(d, PropensityMatrix::Ones(10, 10), nullptr, c),
      std::invalid_argument);
  EXPECT_THROW(
      AlternatingDenoiseTrain(d, PropensityMatrix::Ones(10, 11),
                              nullptr, [&] {
                                AltTrainConfig f = c;
                                f.freeze_rho = true;
                                return f;
                              }()),
      std::invalid_argument);
}

TEST(AlternatingDenoiseTrain, TraceRowsAndValidRates) {
  Rng rng(7);
  const RealMatrix r = LowRankLabels(40, 40, rng);
  const RatingDataset d = Observe(r, 0.5, ErrorParams(0.2, 0.1), rng);
  AltTrainConfig c = SmallConfig();
  c.outer_loops = 12;
  c.k_extreme = 3;
  c.rho_init = ErrorParams(0.1, 0.1);
  RealMatrix q(40, 40);
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = 0.1 + 0.7 * r[k] + 0.05 * rng.Uniform();
  }
  const NoisyRateModel noisy(q);
  const AltTrainResult a =
      AlternatingDenoiseTrain(d, PropensityMatrix::Ones(40, 40), &noisy, c);
  ASSERT_EQ(a.trace.records.size(), 12u);
  for (std::size_t l = 0; l < 12; ++l) {
    const TraceRecord& rec = a.trace.records[l];
    EXPECT_EQ(rec.loop, l + 1);
    EXPECT_GE(rec.rho01_hat, 0.0);
    EXPECT_GE(rec.rho10_hat, 0.0);
    EXPECT_LT(rec.rho01_hat + rec.rho10_hat, 1.0 - kRhoMargin);
    EXPECT_TRUE(std::isfinite(rec.objective));
    EXPECT_TRUE(std::isnan(rec.val_metric));
  }
  const AltTrainResult b =
      AlternatingDenoiseTrain(d, PropensityMatrix::Ones(40, 40), &noisy, c);
  EXPECT_EQ(a.prediction.params, b.prediction.params);
  EXPECT_EQ(a.imputation.params, b.imputation.params);
}

// Without noise and with a sharp h, the refreshed rates move from a wrong
// initial guess towards zero.
TEST(AlternatingDenoiseTrain, NoiselessRatesShrinkFromWrongInit) {
  Rng rng(8);
  const RealMatrix r = LowRankLabels(100, 100, rng);
  const RatingDataset d = Observe(r, 0.5, {}, rng);
  AltTrainConfig c;
  c.dim = 8;
  c.outer_loops = 50;
  c.steps_prediction = 10;
  c.steps_imputation = 10;
  c.k_extreme = 10;
  c.rho_init = ErrorParams(0.3, 0.3);
  c.prediction.optimizer = OptimizerKind::kAdam;
  c.prediction.learning_rate = 0.01;
  c.prediction.batch_size = 512;
  c.imputation = c.prediction;
  c.pretrain = c.prediction;
  c.pretrain.max_epochs = 30;
  c.pretrain.weight_decay = 0.0;
  const PropensityMatrix ones = PropensityMatrix::Ones(100, 100);
  const FactorModel h = PretrainNoisyModel(d, PretrainMethod::kNaive, ones, c);
  const NoisyRateModel noisy(h.PredictAll().values());
  const AltTrainResult out = AlternatingDenoiseTrain(d, ones, &noisy, c);
  const TraceRecord& last = out.trace.records.back();
  EXPECT_LT(last.rho01_hat + last.rho10_hat, 0.1);
}

TEST(TrainJointLearning, EqualsFrozenZeroRates) {
  Rng rng(9);
  const RatingDataset d = Observe(LowRankLabels(30, 30, rng), 0.4, {}, rng);
  AltTrainConfig c = SmallConfig();
  const PropensityMatrix p(RealMatrix(30, 30, 0.4));
  const AltTrainResult jl = TrainJointLearning(d, p, c);
  c.freeze_rho = true;
  c.rho_init = ErrorParams();
  const AltTrainResult frozen = AlternatingDenoiseTrain(d, p, nullptr, c);
  EXPECT_EQ(jl.prediction.params, frozen.prediction.params);
  EXPECT_EQ(jl.imputation.params, frozen.imputation.params);
  ASSERT_EQ(jl.trace.records.size(), frozen.trace.records.size());
  for (const auto& rec : jl.trace.records) {
    EXPECT_EQ(rec.rho01_hat, 0.0);
    EXPECT_EQ(rec.rho10_hat, 0.0);
    EXPECT_FALSE(rec.clamped);
  }
}

TEST(AlternatingDenoiseTrain, DivergenceCarriesTheTrace) {
  Rng rng(10);
  const RatingDataset d = Observe(LowRankLabels(20, 20, rng), 0.5, {}, rng);
  AltTrainConfig c = SmallConfig();
  c.freeze_rho = true;
  c.outer_loops = 50;
  c.prediction.learning_rate = 1e300;
  c.prediction.weight_decay = 1.0;
  try {
    AlternatingDenoiseTrain(d, PropensityMatrix::Ones(20, 20), nullptr, c);
    FAIL() << "expected divergence";
  } catch (const AlternatingDivergence& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_LE(e.trace().records.size(), e.epoch());
  }
}

TEST(TrainOmeAlt, EndToEndOnASmallInstance) {
  Rng rng(11);
  const RealMatrix r = LowRankLabels(30, 40, rng);
  const RatingDataset d = Observe(r, 0.3, ErrorParams(0.1, 0.1), rng);
  AltTrainConfig c = SmallConfig();
  c.outer_loops = 4;
  const OmeAltResult out = TrainOmeAlt(d, c);
  EXPECT_EQ(out.alternating.trace.records.size(), 4u);
  for (double v : testing::Entries(out.p_hat.values())) {
    EXPECT_GE(v, c.propensity_floor);
    EXPECT_LE(v, 1.0);
  }
  const OmeAltResult again = TrainOmeAlt(d, c);
  EXPECT_EQ(out.alternating.prediction.params,
            again.alternating.prediction.params);

  const PropensityMatrix given(RealMatrix(30, 40, 0.3));
  const OmeAltResult with_p = TrainOmeAlt(d, c, &given);
  EXPECT_EQ(with_p.p_hat.values(), given.values());
}

}  // namespace
}  // namespace debiasrec
