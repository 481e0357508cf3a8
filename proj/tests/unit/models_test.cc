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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "debiasrec/rng.h"
#include "support/test_support.h"

namespace debiasrec {
namespace {

using testing::MaxFiniteDifferenceError;

void FillNormal(std::span<double> values, Rng& rng) {
  for (double& v : values) v = rng.Normal();
}

std::vector<PairIndex> RandomPairs(std::size_t n, std::size_t m,
                                   std::size_t count, Rng& rng) {
  std::vector<PairIndex> pairs(count);
  for (auto& p : pairs) p = {rng.UniformIndex(n), rng.UniformIndex(m)};
  return pairs;
}

TEST(PredictAll, ZeroParameters) {
  const FactorModel f{FactorParams(3, 4, 2)};
  for (double v : testing::Entries(f.PredictAll().values())) EXPECT_EQ(v, 0.5);
  const ImputationModel e{FactorParams(3, 4, 2)};
  for (double v : testing::Entries(e.PredictAll().values())) EXPECT_EQ(v, 0.0);
  const PropensityModel p(3, 4);
  for (double v : testing::Entries(p.PredictAll().values())) EXPECT_EQ(v, 0.5);
}

TEST(PredictAll, GlobalBias) {
  FactorModel f{FactorParams(2, 2, 1)};
  f.params.global_bias() = 2.0;
  for (double v : testing::Entries(f.PredictAll().values())) {
    EXPECT_NEAR(v, 0.880797, 1e-6);
    EXPECT_DOUBLE_EQ(v, 1.0 / (1.0 + std::exp(-2.0)));
  }
}

TEST(PredictAll, OutputsAreClipped) {
  FactorModel f{FactorParams(1, 2, 1)};
  f.params.item_bias(0) = 100.0;
  f.params.item_bias(1) = -100.0;
  const PredictionMatrix p = f.PredictAll();
  EXPECT_EQ(p(0, 0), 1.0 - kOutputEps);
  EXPECT_EQ(p(0, 1), kOutputEps);
  EXPECT_EQ(ClippedSigmoidGrad(100.0), 0.0);

  PropensityModel psi(1, 2);
  psi.w_item(0) = -100.0;
  psi.w_item(1) = 100.0;
  const PropensityMatrix ph = psi.PredictAll(0.05);
  EXPECT_EQ(ph(0, 0), 0.05);
  EXPECT_EQ(ph(0, 1), 1.0 - 1e-6);
}

TEST(FactorParams, LayoutAndScore) {
  FactorParams p(2, 3, 2);
  EXPECT_EQ(p.flat().size(), (2u + 3u) * 2u + 2u + 3u + 1u);
  EXPECT_EQ(p.num_embedding_values(), 10u);
  p.user_emb(1)[0] = 2.0;
  p.user_emb(1)[1] = -1.0;
  p.item_emb(2)[0] = 0.5;
  p.item_emb(2)[1] = 3.0;
  p.user_bias(1) = 0.25;
  p.item_bias(2) = -0.5;
  p.global_bias() = 1.0;
  EXPECT_DOUBLE_EQ(p.Score(1, 2), 1.0 - 3.0 + 0.25 - 0.5 + 1.0);
  EXPECT_EQ(p.flat()[2], 2.0);
  EXPECT_EQ(p.flat().back(), 1.0);
  EXPECT_THROW(FactorParams(2, 2, 0), std::invalid_argument);
}

TEST(FactorParams, RandomInitialization) {
  Rng rng(1);
  const FactorParams p = FactorParams::Random(100, 100, 8, rng, 0.01);
  double sq = 0.0;
  for (std::size_t k = 0; k < p.num_embedding_values(); ++k) {
    sq += p.flat()[k] * p.flat()[k];
  }
  EXPECT_NEAR(std::sqrt(sq / p.num_embedding_values()), 0.01, 0.001);
  for (std::size_t k = p.num_embedding_values(); k < p.flat().size(); ++k) {
    EXPECT_EQ(p.flat()[k], 0.0);
  }
  Rng again(1);
  EXPECT_EQ(p, FactorParams::Random(100, 100, 8, again, 0.01));
}

// ---------------------------------------------------------------------------
// Gradient oracles.

struct GradientFixture {
  RatingDataset dataset;
  PropensityMatrix p_hat;
  std::vector<PairIndex> pairs;
  std::vector<double> aligned;  // e_bar or predictions per batch entry
  ErrorParams rho;
};

GradientFixture MakeFixture(Rng& rng) {
  GradientFixture x;
  x.dataset = testing::RandomDataset(4, 5, 0.6, rng);
  x.p_hat = PropensityMatrix(testing::UniformMatrix(4, 5, 0.1, 1.0, rng));
  x.pairs = RandomPairs(4, 5, 12, rng);
  x.aligned.resize(x.pairs.size());
  for (double& v : x.aligned) v = rng.Uniform(0.05, 0.95);
  x.rho = ErrorParams(rng.Uniform(0, 0.45), rng.Uniform(0, 0.45));
  return x;
}

TEST(SurrogateGradient, MatchesFiniteDifferences) {
  Rng rng(2);
  const LossKind kinds[] = {LossKind(), LossKind::CrossEntropyClipped(1e-6)};
  for (int draw = 0; draw < 20; ++draw) {
    const GradientFixture x = MakeFixture(rng);
    FactorParams theta(4, 5, 3);
    FillNormal(theta.flat(), rng);
    const SurrogateBatch batch{x.pairs, x.aligned};
    const LossKind& loss = kinds[draw % 2];
    FactorParams grad(4, 5, 3);
    SurrogateGradient(theta, batch, x.dataset, x.p_hat, x.rho, loss, 0.3,
                      grad);
    const double err = MaxFiniteDifferenceError(
        theta.flat(), grad.flat(), [&] {
          return SurrogateObjective(theta, batch, x.dataset, x.p_hat, x.rho,
                                    loss, 0.3);
        });
    EXPECT_LE(err, 1e-4) << "draw " << draw;
  }
}

TEST(ImputationGradient, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int draw = 0; draw < 20; ++draw) {
    const GradientFixture x = MakeFixture(rng);
    FactorParams phi(4, 5, 3);
    FillNormal(phi.flat(), rng);
    const ImputationBatch batch{x.pairs, x.aligned};
    FactorParams grad(4, 5, 3);
    ImputationGradient(phi, batch, x.dataset, x.p_hat, x.rho, LossKind(), 0.3,
                       grad);
    const double err = MaxFiniteDifferenceError(phi.flat(), grad.flat(), [&] {
      return ImputationObjective(phi, batch, x.dataset, x.p_hat, x.rho,
                                 LossKind(), 0.3);
    });
    EXPECT_LE(err, 1e-4) << "draw " << draw;
  }
}

TEST(PropensityGradient, MatchesFiniteDifferences) {
  Rng rng(4);
  for (int draw = 0; draw < 20; ++draw) {
    const GradientFixture x = MakeFixture(rng);
    PropensityModel psi(4, 5);
    FillNormal(psi.flat(), rng);
    PropensityModel grad(4, 5);
    PropensityGradient(psi, x.pairs, x.dataset, 0.3, grad);
    const double err = MaxFiniteDifferenceError(psi.flat(), grad.flat(), [&] {
      return PropensityObjective(psi, x.pairs, x.dataset, 0.3);
    });
    EXPECT_LE(err, 1e-4) << "draw " << draw;
  }
}

TEST(SupervisedGradient, MatchesFiniteDifferences) {
  Rng rng(5);
  for (int draw = 0; draw < 20; ++draw) {
    const GradientFixture x = MakeFixture(rng);
    FactorParams theta(4, 5, 3);
    FillNormal(theta.flat(), rng);
    const PropensityMatrix* p = draw % 2 == 0 ? &x.p_hat : nullptr;
    FactorParams grad(4, 5, 3);
    SupervisedGradient(theta, x.pairs, x.dataset, p, LossKind(), 0.3, grad);
    const double err =
        MaxFiniteDifferenceError(theta.flat(), grad.flat(), [&] {
          return SupervisedObjective(theta, x.pairs, x.dataset, p, LossKind(),
                                     0.3);
        });
    EXPECT_LE(err, 1e-4) << "draw " << draw;
  }
}

// ---------------------------------------------------------------------------
// Steps.

TEST(SgdStepSurrogate, ZeroLearningRateIsANoOp) {
  Rng rng(6);
  const GradientFixture x = MakeFixture(rng);
  FactorModel model{FactorParams::Random(4, 5, 3, rng, 0.5)};
  const FactorModel before = model;
  SgdConfig config;
  config.learning_rate = 0.0;
  Optimizer opt(config, model.params.flat().size());
  SgdStepSurrogate(model, {x.pairs, x.aligned}, x.dataset, x.p_hat, x.rho,
                   LossKind(), config, opt);
  EXPECT_EQ(model.params, before.params);
}

TEST(SgdStepSurrogate, NoiseFreeUnitPropensityIsAPlainSquaredErrorStep) {
  RatingDataset d = MakeDataset(2, 2);
  d.observed_mask(1, 0) = 1;
  d.observed_ratings(1, 0) = 1.0;
  Rng rng(7);
  FactorModel model{FactorParams::Random(2, 2, 2, rng, 0.5)};
  model.params.user_bias(1) = 0.3;
  const FactorParams before = model.params;
  SgdConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 0.0;
  Optimizer opt(config, before.flat().size());
  const std::vector<PairIndex> pairs = {{1, 0}};
  const std::vector<double> e_bar = {0.7};
  SgdStepSurrogate(model, {pairs, e_bar}, d, PropensityMatrix::Ones(2, 2),
                   ErrorParams(), LossKind(), config, opt);

  // Hand-derived update of (sigmoid(s) - 1)^2 at the single pair.
  const double s = before.Score(1, 0);
  const double f = 1.0 / (1.0 + std::exp(-s));
  const double g = 2.0 * (f - 1.0) * f * (1.0 - f);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(model.params.user_emb(1)[k],
                before.user_emb(1)[k] - 0.1 * g * before.item_emb(0)[k],
                1e-15);
    EXPECT_NEAR(model.params.item_emb(0)[k],
                before.item_emb(0)[k] - 0.1 * g * before.user_emb(1)[k],
                1e-15);
    EXPECT_EQ(model.params.user_emb(0)[k], before.user_emb(0)[k]);
  }
  EXPECT_NEAR(model.params.user_bias(1), 0.3 - 0.1 * g, 1e-15);
  EXPECT_NEAR(model.params.item_bias(0), -0.1 * g, 1e-15);
  EXPECT_NEAR(model.params.global_bias(), -0.1 * g, 1e-15);
  EXPECT_EQ(model.params.user_bias(0), 0.0);
}

TEST(SgdStepSurrogate, NonFiniteGradientThrows) {
  Rng rng(8);
  const GradientFixture x = MakeFixture(rng);
  FactorModel model{FactorParams(4, 5, 3)};
  model.params.global_bias() = std::numeric_limits<double>::quiet_NaN();
  SgdConfig config;
  Optimizer opt(config, model.params.flat().size());
  std::vector<PairIndex> pairs;
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t i = 0; i < 5; ++i) pairs.push_back({u, i});
  }
  const std::vector<double> e_bar(pairs.size(), 0.0);
  RatingDataset all = x.dataset;
  all.observed_mask = BinaryMatrix(4, 5, 1);
  EXPECT_THROW(SgdStepSurrogate(model, {pairs, e_bar}, all, x.p_hat, x.rho,
                                LossKind(), config, opt),
               TrainingDivergence);
}

TEST(SgdStepImputation, ZeroLearningRateIsANoOp) {
  Rng rng(9);
  const GradientFixture x = MakeFixture(rng);
  ImputationModel model{FactorParams::Random(4, 5, 3, rng, 0.5)};
  const FactorParams before = model.params;
  SgdConfig config;
  config.learning_rate = 0.0;
  Optimizer opt(config, before.flat().size());
  SgdStepImputation(model, {x.pairs, x.aligned}, x.dataset, x.p_hat, x.rho,
                    LossKind(), config, opt);
  EXPECT_EQ(model.params, before);
}

TEST(ImputationGradient, ZeroAtExactSurrogateTargets) {
  RatingDataset d = MakeDataset(3, 4);
  d.observed_mask = BinaryMatrix(3, 4, 1);
  d.observed_ratings = RealMatrix(3, 4, 1.0);
  const ErrorParams rho(0.2, 0.1);
  const double f = 0.35;
  const double target = SurrogateLoss(LossKind(), f, 1, rho);
  FactorParams phi(3, 4, 2);
  phi.global_bias() = target;
  std::vector<PairIndex> pairs;
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t i = 0; i < 4; ++i) pairs.push_back({u, i});
  }
  const std::vector<double> preds(pairs.size(), f);
  FactorParams grad(3, 4, 2);
  Rng rng(10);
  const PropensityMatrix p(testing::UniformMatrix(3, 4, 0.2, 1.0, rng));
  ImputationGradient(phi, {pairs, preds}, d, p, rho, LossKind(), 0.0, grad);
  for (double g : grad.flat()) EXPECT_EQ(g, 0.0);
}

TEST(Optimizer, AdamIsDeterministic) {
  SgdConfig config;
  config.optimizer = OptimizerKind::kAdam;
  config.learning_rate = 0.01;
  std::vector<double> a = {1.0, -2.0, 0.5}, b = a;
  Optimizer oa(config, 3), ob(config, 3);
  const std::vector<double> grad = {0.3, -0.1, 2.0};
  for (int k = 0; k < 10; ++k) {
    oa.Step(a, grad);
    ob.Step(b, grad);
  }
  EXPECT_EQ(a, b);
  // The first bias-corrected Adam step moves each entry by about lr.
  std::vector<double> c = {0.0};
  Optimizer oc(config, 1);
  oc.Step(c, std::vector<double>{5.0});
  EXPECT_NEAR(c[0], -0.01, 1e-8);
}

TEST(ValidateSgdConfig, RejectsBadFields) {
  SgdConfig config;
  config.learning_rate = -1.0;
  EXPECT_THROW(ValidateSgdConfig(config), std::invalid_argument);
  config = SgdConfig();
  config.weight_decay = -0.1;
  EXPECT_THROW(ValidateSgdConfig(config), std::invalid_argument);
  config = SgdConfig();
  config.optimizer = OptimizerKind::kAdam;
  config.adam_beta1 = 1.0;
  EXPECT_THROW(ValidateSgdConfig(config), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Propensity training.

TEST(TrainPropensity, AllObservedSaturates) {
  RatingDataset d = MakeDataset(5, 5);
  d.observed_mask = BinaryMatrix(5, 5, 1);
  SgdConfig config;
  config.learning_rate = 1.0;
  config.batch_size = 0;
  config.max_epochs = 200;
  const PropensityModel psi = TrainPropensity(d, config);
  for (double p : testing::Entries(psi.PredictAll().values())) EXPECT_GT(p, 0.95);
}

TEST(TrainPropensity, RowRatesAreRecovered) {
  Rng rng(11);
  const std::size_t n = 100;
  RatingDataset d = MakeDataset(n, n);
  auto rate = [&](std::size_t u) { return 0.1 + 0.4 * u / double(n); };
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < n; ++i) {
      d.observed_mask(u, i) = rng.Bernoulli(rate(u)) ? 1 : 0;
    }
  }
  SgdConfig config;
  config.optimizer = OptimizerKind::kAdam;
  config.learning_rate = 0.05;
  config.batch_size = 0;
  config.max_epochs = 100;
  const RealMatrix p = TrainPropensity(d, config).PredictAll().values();
  double mean = 0.0;
  double abs_err = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < n; ++i) {
      mean += p(u, i);
      abs_err += std::abs(p(u, i) - rate(u));
    }
  }
  EXPECT_NEAR(mean / d.num_pairs(), 0.3, 0.02);
  EXPECT_LT(abs_err / d.num_pairs(), 0.07);
}

TEST(TrainPropensity, ZeroEpochsLeavesParametersUnchanged) {
  Rng rng(12);
  const RatingDataset d = testing::RandomDataset(6, 7, 0.3, rng);
  SgdConfig config;
  config.max_epochs = 0;
  EXPECT_EQ(TrainPropensity(d, config), PropensityModel(6, 7));
}

TEST(TrainPropensity, FullBatchLossIsMonotone) {
  Rng rng(13);
  RatingDataset d = MakeDataset(30, 40);
  for (std::size_t u = 0; u < 30; ++u) {
    for (std::size_t i = 0; i < 40; ++i) {
      d.observed_mask(u, i) = rng.Bernoulli(0.1 + 0.02 * u + 0.01 * i) ? 1 : 0;
    }
  }
  SgdConfig config;
  config.learning_rate = 1.0;
  config.batch_size = 0;
  config.max_epochs = 100;
  std::vector<double> history;
  TrainPropensity(d, config, &history);
  ASSERT_EQ(history.size(), 100u);
  for (std::size_t k = 1; k < history.size(); ++k) {
    EXPECT_LE(history[k], history[k - 1]) << "epoch " << k + 1;
  }
}

TEST(TrainPropensity, MiniBatchIsDeterministic) {
  Rng rng(14);
  const RatingDataset d = testing::RandomDataset(10, 12, 0.3, rng);
  SgdConfig config;
  config.learning_rate = 0.5;
  config.batch_size = 16;
  config.max_epochs = 5;
  config.seed = 99;
  EXPECT_EQ(TrainPropensity(d, config), TrainPropensity(d, config));
}

TEST(TrainPropensity, DivergenceNamesTheEpoch) {
  Rng rng(15);
  const RatingDataset d = testing::RandomDataset(4, 4, 0.3, rng);
  SgdConfig config;
  config.learning_rate = 1e308;
  config.batch_size = 0;
  config.max_epochs = 10;
  try {
    TrainPropensity(d, config);
    FAIL() << "expected divergence";
  } catch (const TrainingDivergence& e) {
    EXPECT_GE(e.epoch(), 1u);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints.

TEST(Checkpoint, RoundTripsExactly) {
  Rng rng(16);
  FactorModel f{FactorParams(3, 4, 2)};
  FillNormal(f.params.flat(), rng);
  std::stringstream sf;
  WriteCheckpoint(sf, f);
  EXPECT_EQ(ReadFactorCheckpoint(sf).params, f.params);

  ImputationModel e{FactorParams(2, 5, 3)};
  FillNormal(e.params.flat(), rng);
  std::stringstream se;
  WriteCheckpoint(se, e);
  EXPECT_EQ(ReadImputationCheckpoint(se).params, e.params);

  PropensityModel p(3, 2);
  FillNormal(p.flat(), rng);
  std::stringstream sp;
  WriteCheckpoint(sp, p);
  EXPECT_EQ(ReadPropensityCheckpoint(sp), p);
}

TEST(Checkpoint, RejectsKindMismatchAndGarbage) {
  std::stringstream s;
  WriteCheckpoint(s, FactorModel{FactorParams(2, 2, 1)});
  EXPECT_THROW(ReadImputationCheckpoint(s), std::runtime_error);
  std::stringstream garbage("not a checkpoint");
  EXPECT_THROW(ReadFactorCheckpoint(garbage), std::runtime_error);
  std::stringstream truncated;
  WriteCheckpoint(truncated, FactorModel{FactorParams(2, 2, 1)});
  std::string text = truncated.str();
  std::stringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(ReadFactorCheckpoint(cut), std::runtime_error);
}

}  // namespace
}  // namespace debiasrec
