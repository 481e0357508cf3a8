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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "debiasrec/rng.h"
#include "support/test_support.h"

namespace debiasrec {
namespace {

constexpr std::array<double, 5> kFifths = {0.2, 0.2, 0.2, 0.2, 0.2};

// E[clamp(X, lo, hi)] for X ~ N(mean, sd^2) by composite Simpson's rule.
double ClippedNormalMean(double mean, double sd, double lo, double hi) {
  const auto density = [&](double x) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi));
  };
  const double a = mean - 12 * sd, b = mean + 12 * sd;
  const int n = 200000;
  const double h = (b - a) / n;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = a + k * h;
    const double w = (k == 0 || k == n) ? 1 : (k % 2 == 1 ? 4 : 2);
    sum += w * std::clamp(x, lo, hi) * density(x);
  }
  return sum * h / 3;
}

RealMatrix LevelMatrix(std::size_t n, std::size_t m, Rng& rng) {
  RealMatrix g(n, m);
  for (double& v : g.flat()) v = kGammaLevels[rng.UniformIndex(5)];
  return g;
}

TEST(ValidateBenchmarkSpec, NamesTheField) {
  BenchmarkSpec spec;
  EXPECT_TRUE(ValidateBenchmarkSpec(spec).empty());
  spec.gamma_proportions = {0.2, 0.2, 0.2, 0.2, 0.3};
  auto v = ValidateBenchmarkSpec(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("gamma_proportions"), std::string::npos);
  spec = BenchmarkSpec();
  spec.alpha = 0.0;
  v = ValidateBenchmarkSpec(spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("alpha"), std::string::npos);
  spec.n_users = 0;
  spec.p_base = -1;
  EXPECT_EQ(ValidateBenchmarkSpec(spec).size(), 3u);
}

TEST(Names, RoundTrip) {
  for (PredictionKind kind : AllPredictionKinds()) {
    EXPECT_EQ(ParsePredictionKind(PredictionKindName(kind)), kind);
  }
  EXPECT_EQ(AllPredictionKinds().size(), 6u);
  for (BetaMode mode : {BetaMode::kNone, BetaMode::kPerPair, BetaMode::kPerRun}) {
    EXPECT_EQ(ParseBetaMode(BetaModeName(mode)), mode);
  }
  EXPECT_FALSE(ParsePredictionKind("SIDEWAYS").has_value());
}

TEST(BuildGamma, SingleLevel) {
  Rng rng(1);
  const GammaMatrix g = BuildGamma({1, 0, 0, 0, 0},
                                   testing::UniformMatrix(4, 5, 0, 1, rng));
  for (double v : g.gamma.flat()) EXPECT_EQ(v, 0.1);
  for (int r : g.five_scale.flat()) EXPECT_EQ(r, 1);
}

TEST(BuildGamma, DescendingScores) {
  const GammaMatrix g =
      BuildGamma(kFifths, RealMatrix(1, 5, {5.0, 4.0, 3.0, 2.0, 1.0}));
  EXPECT_EQ(g.gamma, RealMatrix(1, 5, {0.9, 0.7, 0.5, 0.3, 0.1}));
  EXPECT_EQ(g.five_scale, Matrix<int>(1, 5, {5, 4, 3, 2, 1}));
}

TEST(BuildGamma, UniformScoresGiveFifths) {
  Rng rng(2);
  const GammaMatrix g =
      BuildGamma(kFifths, testing::UniformMatrix(37, 41, 0, 1, rng));
  const double fifth = 37.0 * 41.0 / 5.0;
  for (double level : kGammaLevels) {
    const auto count = std::count(g.gamma.flat().begin(),
                                  g.gamma.flat().end(), level);
    EXPECT_LE(std::abs(count - fifth), 1.0) << level;
  }
}

TEST(BuildGamma, TiesBrokenByIndex) {
  const GammaMatrix g = BuildGamma(kFifths, RealMatrix(1, 5, 0.0));
  EXPECT_EQ(g.gamma, RealMatrix(1, 5, {0.1, 0.3, 0.5, 0.7, 0.9}));
}

TEST(BuildGamma, UserPermutationCommutes) {
  Rng rng(3);
  const RealMatrix scores = testing::UniformMatrix(6, 9, 0, 1, rng);
  const std::array<double, 5> props = {0.1, 0.3, 0.2, 0.25, 0.15};
  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  RealMatrix permuted(6, 9);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t i = 0; i < 9; ++i) permuted(u, i) = scores(perm[u], i);
  }
  const GammaMatrix a = BuildGamma(props, scores);
  const GammaMatrix b = BuildGamma(props, permuted);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_EQ(b.gamma(u, i), a.gamma(perm[u], i));
    }
  }
  EXPECT_EQ(BuildGamma(props, scores).gamma, a.gamma);
}

TEST(GammaFromSupplied, RejectsOffLevelValues) {
  EXPECT_NO_THROW(GammaFromSupplied(RealMatrix(1, 2, {0.1, 0.9})));
  EXPECT_THROW(GammaFromSupplied(RealMatrix(1, 2, {0.1, 0.4})),
               std::invalid_argument);
  EXPECT_EQ(GammaFromSupplied(RealMatrix(1, 2, {0.3, 0.7})).five_scale,
            Matrix<int>(1, 2, {2, 4}));
}

TEST(CompleteRatingsMf, ZeroEpochsGivesZeros) {
  const std::vector<RatingTriple> triples = {{0, 0, 5.0}, {1, 1, 1.0}};
  CompletionConfig config;
  config.sgd.max_epochs = 0;
  for (double v : testing::Entries(CompleteRatingsMf(triples, 2, 3, config))) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(CompleteRatingsMf, RankOneFullyObserved) {
  Rng rng(4);
  const std::size_t n = 20, m = 25;
  std::vector<double> a(n), b(m);
  for (double& x : a) x = rng.Uniform(0.5, 1.5);
  for (double& x : b) x = rng.Uniform(0.5, 1.5);
  std::vector<RatingTriple> triples;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < m; ++i) triples.push_back({u, i, a[u] * b[i]});
  }
  CompletionConfig config;
  config.dim = 2;
  config.sgd.learning_rate = 0.02;
  config.sgd.weight_decay = 0.0;
  config.sgd.max_epochs = 300;
  const RealMatrix out = CompleteRatingsMf(triples, n, m, config);
  double sse = 0.0;
  for (const auto& t : triples) {
    const double e = out(t.user, t.item) - t.rating;
    sse += e * e;
  }
  EXPECT_LE(std::sqrt(sse / triples.size()), 0.05);
}

TEST(CompleteRatingsMf, HalfObservedRankTwo) {
  Rng rng(5);
  const std::size_t n = 40, m = 40;
  RealMatrix truth(n, m);
  std::vector<double> a1(n), a2(n), b1(m), b2(m);
  for (auto* v : {&a1, &a2}) for (double& x : *v) x = rng.Normal(0, 1);
  for (auto* v : {&b1, &b2}) for (double& x : *v) x = rng.Normal(0, 1);
  std::vector<RatingTriple> train, test;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t i = 0; i < m; ++i) {
      const RatingTriple t{u, i, 0.5 * (a1[u] * b1[i] + a2[u] * b2[i])};
      (rng.Bernoulli(0.5) ? train : test).push_back(t);
    }
  }
  CompletionConfig config;
  config.dim = 2;
  config.sgd.learning_rate = 0.01;
  config.sgd.weight_decay = 0.0;
  config.sgd.max_epochs = 400;
  const RealMatrix out = CompleteRatingsMf(train, n, m, config);
  double sse = 0.0;
  for (const auto& t : test) {
    const double e = out(t.user, t.item) - t.rating;
    sse += e * e;
  }
  EXPECT_LE(std::sqrt(sse / test.size()), 0.2);
}

TEST(CompleteRatingsMf, RejectsOutOfRangeTriples) {
  const std::vector<RatingTriple> triples = {{2, 0, 5.0}};
  EXPECT_THROW(CompleteRatingsMf(triples, 2, 2, CompletionConfig()),
               std::invalid_argument);
}

TEST(BuildPredictionMatrix, Rotate) {
  Rng rng(6);
  const RealMatrix gamma(1, 5, {0.1, 0.3, 0.5, 0.7, 0.9});
  const PredictionMatrix p =
      BuildPredictionMatrix(PredictionKind::kRotate, gamma, rng);
  EXPECT_EQ(p(0, 0), 0.9);
  EXPECT_NEAR(p(0, 1), 0.1, 1e-15);
  EXPECT_NEAR(p(0, 4), 0.7, 1e-15);
}

TEST(BuildPredictionMatrix, Crs) {
  Rng rng(7);
  const RealMatrix gamma(1, 5, {0.1, 0.3, 0.5, 0.7, 0.9});
  const PredictionMatrix p = BuildPredictionMatrix(PredictionKind::kCrs, gamma, rng);
  EXPECT_EQ(p.values(), RealMatrix(1, 5, {0.2, 0.2, 0.2, 0.6, 0.6}));
}

TEST(BuildPredictionMatrix, SkewMatchesClippedNormalMoment) {
  Rng rng(8);
  const RealMatrix gamma(1, 100000, 0.9);
  const PredictionMatrix p =
      BuildPredictionMatrix(PredictionKind::kSkew, gamma, rng);
  testing::MeanAccumulator acc;
  for (double v : testing::Entries(p.values())) {
    ASSERT_GE(v, 0.1);
    ASSERT_LE(v, 0.9);
    acc.Add(v);
  }
  const double oracle = ClippedNormalMean(0.9, 0.05, 0.1, 0.9);
  EXPECT_NEAR(oracle, 0.880053, 1e-6);
  EXPECT_LE(std::abs(acc.mean() - oracle), 3 * acc.StdError());
}

TEST(BuildPredictionMatrix, OneThreeFiveRaiseAMatchingSubset) {
  // 90 top cells and 180 or more cells at every other level.
  RealMatrix gamma(30, 30);
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    gamma[k] = k % 10 == 0 ? 0.9 : kGammaLevels[k % 4];
  }
  const auto top = std::count(gamma.flat().begin(), gamma.flat().end(), 0.9);
  const std::pair<PredictionKind, double> cases[] = {
      {PredictionKind::kOne, 0.1},
      {PredictionKind::kThree, 0.3},
      {PredictionKind::kFive, 0.5}};
  for (const auto& [kind, source] : cases) {
    Rng rng(10);
    std::vector<std::string> warnings;
    const PredictionMatrix p = BuildPredictionMatrix(kind, gamma, rng, &warnings);
    EXPECT_TRUE(warnings.empty());
    long raised = 0;
    for (std::size_t k = 0; k < gamma.size(); ++k) {
      if (p.values()[k] != gamma[k]) {
        EXPECT_EQ(gamma[k], source);
        EXPECT_EQ(p.values()[k], 0.9);
        ++raised;
      }
    }
    EXPECT_EQ(raised, top);
  }
}

TEST(BuildPredictionMatrix, ReservoirIsUniform) {
  // 1 top cell and 4 source cells: each source cell is chosen w.p. 1/4.
  const RealMatrix gamma(1, 5, {0.1, 0.1, 0.9, 0.1, 0.1});
  Rng rng(11);
  std::array<int, 5> hits{};
  const int trials = 40000;
  for (int t = 0; t < trials; ++t) {
    const PredictionMatrix p =
        BuildPredictionMatrix(PredictionKind::kOne, gamma, rng);
    for (std::size_t k : {0u, 1u, 3u, 4u}) hits[k] += p(0, k) == 0.9;
  }
  for (std::size_t k : {0u, 1u, 3u, 4u}) {
    EXPECT_NEAR(hits[k] / double(trials), 0.25, 3 * std::sqrt(0.1875 / trials));
  }
}

TEST(BuildPredictionMatrix, TooFewSourceCellsWarns) {
  const RealMatrix gamma(1, 4, {0.9, 0.9, 0.9, 0.5});
  Rng rng(12);
  std::vector<std::string> warnings;
  const PredictionMatrix p =
      BuildPredictionMatrix(PredictionKind::kFive, gamma, rng, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(p(0, 3), 0.9);
}

TEST(AssignPropensities, Formula) {
  const Matrix<int> r(1, 5, {1, 2, 3, 4, 5});
  const RealMatrix p = AssignPropensities(1.0, 0.5, r);
  EXPECT_EQ(p(0, 0), 0.0625);
  EXPECT_EQ(p(0, 1), 0.0625);
  EXPECT_EQ(p(0, 2), 0.125);
  EXPECT_EQ(p(0, 3), 0.25);
  EXPECT_EQ(p(0, 4), 0.5);
  for (double v : testing::Entries(AssignPropensities(0.3, 1.0, r))) EXPECT_EQ(v, 0.3);
}

TEST(AssignPropensities, MonotoneInRating) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const double p_base = rng.Uniform(0.01, 3.0);
    const double alpha = rng.Uniform(0.01, 1.0);
    const RealMatrix p =
        AssignPropensities(p_base, alpha, Matrix<int>(1, 5, {1, 2, 3, 4, 5}));
    for (std::size_t k = 1; k < 5; ++k) EXPECT_LE(p(0, k - 1), p(0, k));
  }
}

TEST(AssignPropensities, ClipsAboveOneWithWarning) {
  std::vector<std::string> warnings;
  const RealMatrix p =
      AssignPropensities(4.0, 0.5, Matrix<int>(1, 2, {1, 5}), &warnings);
  EXPECT_EQ(p(0, 0), 0.25);
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(PerturbPropensities, Endpoints) {
  const RealMatrix p(1, 3, {0.5, 0.2, 0.9});
  EXPECT_EQ(PerturbPropensities(p, 0.3, RealMatrix(1, 3, 0.0), 1e-9), p);
  for (double v : testing::Entries(
           PerturbPropensities(p, 0.3, RealMatrix(1, 3, 1.0), 1e-9))) {
    EXPECT_DOUBLE_EQ(v, 0.3);
  }
  const RealMatrix half =
      PerturbPropensities(RealMatrix(1, 1, 0.5), 0.25, RealMatrix(1, 1, 0.5), 0.05);
  EXPECT_DOUBLE_EQ(half(0, 0), 1.0 / 3.0);
  EXPECT_THROW(PerturbPropensities(p, 0.0, RealMatrix(1, 3, 0.5), 0.05),
               std::invalid_argument);
}

TEST(PerturbPropensities, FloorApplied) {
  const RealMatrix out = PerturbPropensities(RealMatrix(1, 1, 0.01), 0.3,
                                             RealMatrix(1, 1, 0.0), 0.05);
  EXPECT_EQ(out(0, 0), 0.05);
}

TEST(SamplePerturbedPropensities, ModeNoneIsIdentity) {
  Rng rng(14);
  const RealMatrix p = testing::UniformMatrix(3, 3, 0.1, 1.0, rng);
  const BinaryMatrix o(3, 3, {1, 0, 0, 1, 0, 0, 0, 0, 1});
  EXPECT_EQ(SamplePerturbedPropensities(p, o, BetaMode::kNone, 0.05, rng), p);
  const RealMatrix run =
      SamplePerturbedPropensities(p, o, BetaMode::kPerRun, 0.05, rng);
  for (double v : run.flat()) EXPECT_GT(v, 0.0);
}

BenchmarkSpec SmallSpec() {
  BenchmarkSpec spec;
  spec.n_users = 60;
  spec.n_items = 80;
  return spec;
}

TEST(SampleInstance, NoiseFreeObservedEqualsTruth) {
  BenchmarkSpec spec = SmallSpec();
  spec.rho = ErrorParams();
  Rng rng(15);
  const BenchmarkInstance inst =
      SampleInstance(spec, LowRankScores(60, 80, 4, rng));
  EXPECT_EQ(inst.observed_ratings, inst.true_ratings);
  EXPECT_TRUE(ValidateDataset(inst.ToDataset()).empty());
}

TEST(SampleInstance, TruePreferencesFollowGamma) {
  BenchmarkSpec spec;
  spec.n_users = 250;
  spec.n_items = 400;
  spec.gamma_source = GammaSource::kSuppliedMatrix;
  const BenchmarkInstance inst =
      SampleInstance(spec, RealMatrix(250, 400, 0.9));
  testing::MeanAccumulator acc;
  for (double r : inst.true_ratings.flat()) acc.Add(r);
  EXPECT_LE(std::abs(acc.mean() - 0.9), 3 * acc.StdError());
}

TEST(SampleInstance, FlipRatesAndLinkage) {
  BenchmarkSpec spec;
  spec.n_users = 300;
  spec.n_items = 400;
  spec.rho = ErrorParams(0.2, 0.1);
  spec.seed = 3;
  Rng rng(16);
  const BenchmarkInstance inst =
      SampleInstance(spec, LowRankScores(300, 400, 4, rng));
  testing::MeanAccumulator kept_pos, raised_neg, noisy;
  double gamma_mean = 0.0;
  for (std::size_t k = 0; k < inst.gamma.size(); ++k) {
    if (inst.true_ratings[k] == 1.0) {
      kept_pos.Add(inst.observed_ratings[k]);
    } else {
      raised_neg.Add(inst.observed_ratings[k]);
    }
    noisy.Add(inst.observed_ratings[k]);
    gamma_mean += inst.gamma[k];
  }
  gamma_mean /= inst.gamma.size();
  EXPECT_LE(std::abs(kept_pos.mean() - 0.8), 3 * kept_pos.StdError());
  EXPECT_LE(std::abs(raised_neg.mean() - 0.1), 3 * raised_neg.StdError());
  EXPECT_LE(std::abs(noisy.mean() - (0.7 * gamma_mean + 0.1)),
            3 * noisy.StdError());
}

TEST(SampleInstance, ObservationFollowsPropensity) {
  BenchmarkSpec spec;
  spec.n_users = 200;
  spec.n_items = 300;
  spec.seed = 4;
  Rng rng(17);
  const BenchmarkInstance inst =
      SampleInstance(spec, LowRankScores(200, 300, 4, rng));
  std::array<testing::MeanAccumulator, 5> by_level;
  for (std::size_t k = 0; k < inst.gamma.size(); ++k) {
    by_level[inst.five_scale[k] - 1].Add(inst.observed_mask[k]);
  }
  for (int r = 1; r <= 5; ++r) {
    const double expected = std::pow(0.5, std::min(4, 6 - r));
    EXPECT_LE(std::abs(by_level[r - 1].mean() - expected),
              3 * by_level[r - 1].StdError() + 1e-12)
        << r;
  }
}

TEST(SampleInstance, DeterministicGivenSeed) {
  BenchmarkSpec spec = SmallSpec();
  spec.pred_kind = PredictionKind::kSkew;
  spec.seed = 42;
  Rng a(1), b(1);
  const BenchmarkInstance x = SampleInstance(spec, LowRankScores(60, 80, 3, a));
  const BenchmarkInstance y = SampleInstance(spec, LowRankScores(60, 80, 3, b));
  EXPECT_EQ(x.prediction_matrix.values(), y.prediction_matrix.values());
  EXPECT_EQ(x.observed_mask, y.observed_mask);
  EXPECT_EQ(x.observed_ratings, y.observed_ratings);
  EXPECT_EQ(x.p_hat_perturbed, y.p_hat_perturbed);
  spec.seed = 43;
  Rng c(1);
  const BenchmarkInstance z = SampleInstance(spec, LowRankScores(60, 80, 3, c));
  EXPECT_NE(x.observed_mask, z.observed_mask);
}

TEST(SampleInstance, RejectsInvalidSpecAndShape) {
  BenchmarkSpec spec = SmallSpec();
  EXPECT_THROW(SampleInstance(spec, RealMatrix(2, 2)), std::invalid_argument);
  spec.alpha = 2.0;
  EXPECT_THROW(SampleInstance(spec, RealMatrix(60, 80)), std::invalid_argument);
}

TEST(BenchmarkInstance, PropensityViewsApplyTheFloor) {
  BenchmarkSpec spec = SmallSpec();
  spec.alpha = 0.2;  // lowest level 0.2^4 = 0.0016
  Rng rng(18);
  const BenchmarkInstance inst =
      SampleInstance(spec, LowRankScores(60, 80, 3, rng));
  const double lowest = *std::min_element(inst.p_true.flat().begin(),
                                          inst.p_true.flat().end());
  EXPECT_NEAR(lowest, 0.0016, 1e-12);
  const PropensityMatrix p = inst.TruePropensities();
  for (double v : testing::Entries(p.values())) EXPECT_GE(v, spec.propensity_floor);
}

}  // namespace
}  // namespace debiasrec
