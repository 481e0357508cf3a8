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

#include "cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "debiasrec/metrics.h"
#include "debiasrec/noise.h"

namespace debiasrec::cli {
namespace {

namespace fs = std::filesystem;

// Keys shared by the commands that build a BenchmarkSpec.
const std::set<std::string> kSpecKeys = {
    "n_users",      "n_items",  "gamma_proportions", "p_base",
    "alpha",        "rho01",    "rho10",             "pred_kind",
    "beta_mode",    "seed",     "gamma_source",      "propensity_floor",
    "score.rank",   "score.seed", "completion.dim",  "completion.epochs",
    "completion.learning_rate", "loss"};

const std::set<std::string> kSgdFields = {
    "learning_rate", "batch_size", "weight_decay", "max_epochs",
    "patience",      "seed",       "optimizer"};

const std::set<std::string> kAltKeys = {
    "alt.steps_prediction", "alt.steps_imputation", "alt.outer_loops",
    "alt.rho01_init",       "alt.rho10_init",       "alt.k_extreme",
    "alt.pretrain_method",  "alt.dim",              "alt.freeze_rho",
    "alt.validation_fraction", "alt.propensity_floor", "alt.seed", "loss"};

bool IsTrainKey(const std::string& key) {
  if (kAltKeys.count(key) > 0) return true;
  for (const char* group : {"prediction", "imputation", "propensity",
                            "pretrain"}) {
    const std::string prefix = std::string("sgd.") + group + ".";
    if (key.rfind(prefix, 0) == 0 &&
        kSgdFields.count(key.substr(prefix.size())) > 0) {
      return true;
    }
  }
  return false;
}

template <typename Pred>
void CheckKeys(const KeyValueConfig& config, Pred known) {
  for (const auto& [key, value] : config.values()) {
    if (!known(key)) throw ValidationError("unknown config key '" + key + "'");
  }
}

KeyValueConfig LoadConfig(const std::string& path) {
  if (path.empty()) return {};
  try {
    return KeyValueConfig::Load(path);
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Wraps KeyValueConfig getters so parse failures become ValidationError.
template <typename F>
auto Get(F getter) -> decltype(getter()) {
  try {
    return getter();
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
}

LossKind LossFromConfig(const KeyValueConfig& config) {
  const auto text = config.GetString("loss");
  if (!text) return LossKind::SquaredError();
  try {
    return LossKind::Parse(*text);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("loss: ") + e.what());
  }
}

void ApplySgd(const KeyValueConfig& config, const std::string& group,
              SgdConfig& sgd) {
  const std::string p = "sgd." + group + ".";
  if (auto v = Get([&] { return config.GetDouble(p + "learning_rate"); })) {
    sgd.learning_rate = *v;
  }
  if (auto v = Get([&] { return config.GetUnsigned(p + "batch_size"); })) {
    sgd.batch_size = *v;
  }
  if (auto v = Get([&] { return config.GetDouble(p + "weight_decay"); })) {
    sgd.weight_decay = *v;
  }
  if (auto v = Get([&] { return config.GetUnsigned(p + "max_epochs"); })) {
    sgd.max_epochs = *v;
  }
  if (auto v = Get([&] { return config.GetUnsigned(p + "patience"); })) {
    sgd.patience = *v;
  }
  if (auto v = Get([&] { return config.GetUnsigned(p + "seed"); })) {
    sgd.seed = *v;
  }
  if (auto v = config.GetString(p + "optimizer")) {
    if (*v == "sgd") {
      sgd.optimizer = OptimizerKind::kSgd;
    } else if (*v == "adam") {
      sgd.optimizer = OptimizerKind::kAdam;
    } else {
      throw ValidationError(p + "optimizer must be sgd or adam");
    }
  }
  try {
    ValidateSgdConfig(sgd);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(p + ": " + e.what());
  }
}

void WriteHeader(std::ostream& out, const std::string& hash) {
  out << "# manifest " << hash << '\n';
}

std::ofstream OpenReport(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void WriteEstimateRows(std::ostream& out, const std::vector<EstimateRow>& rows,
                       const std::string& prefix = "") {
  for (const auto& r : rows) {
    out << prefix << EstimatorName(r.kind) << ',';
    if (r.value) out << *r.value;
    out << ',' << r.p_star << ',';
    if (r.re) out << *r.re;
    out << ',' << r.error << '\n';
  }
}

std::vector<EstimatorKind> ParseEstimatorList(const std::string& text) {
  if (text == "all") return AllEstimatorKinds();
  std::vector<EstimatorKind> out;
  for (const auto& name : SplitList(text)) {
    const auto kind = ParseEstimatorKind(name);
    if (!kind) throw ValidationError("unknown estimator '" + name + "'");
    out.push_back(*kind);
  }
  if (out.empty()) throw ValidationError("empty estimator list");
  return out;
}

std::vector<PredictionKind> ParseKindList(const std::string& text) {
  if (text == "all") return AllPredictionKinds();
  std::vector<PredictionKind> out;
  for (const auto& name : SplitList(text)) {
    std::string upper = name;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    const auto kind = ParsePredictionKind(upper);
    if (!kind) throw ValidationError("unknown prediction kind '" + name + "'");
    out.push_back(*kind);
  }
  if (out.empty()) throw ValidationError("empty prediction kind list");
  return out;
}

// Builds the score (or gamma) matrix feeding SampleInstance.
struct SourceOptions {
  std::string scores_csv;
  std::string gamma_csv;
  std::string triples;
};

RealMatrix LoadSource(const KeyValueConfig& config, const BenchmarkSpec& spec,
                      const SourceOptions& opts,
                      std::map<std::string, std::string>& provenance) {
  RealMatrix source;
  if (spec.gamma_source == GammaSource::kSuppliedMatrix) {
    if (opts.gamma_csv.empty()) {
      throw ValidationError("gamma_source = supplied requires --gamma");
    }
    source = ReadMatrixCsv(opts.gamma_csv);
    provenance["source"] = "gamma:" + opts.gamma_csv;
  } else if (!opts.scores_csv.empty()) {
    source = ReadMatrixCsv(opts.scores_csv);
    provenance["source"] = "scores:" + opts.scores_csv;
  } else if (!opts.triples.empty()) {
    CompletionConfig completion;
    completion.dim =
        Get([&] { return config.GetUnsigned("completion.dim"); }).value_or(8);
    completion.sgd.max_epochs =
        Get([&] { return config.GetUnsigned("completion.epochs"); })
            .value_or(50);
    completion.sgd.learning_rate =
        Get([&] { return config.GetDouble("completion.learning_rate"); })
            .value_or(0.01);
    completion.sgd.seed = spec.seed;
    const auto triples = ReadRawTriples(opts.triples);
    source = CompleteRatingsMf(triples, spec.n_users, spec.n_items, completion);
    provenance["source"] = "mf_completion:" + opts.triples;
    provenance["completion.dim"] = std::to_string(completion.dim);
    provenance["completion.epochs"] = std::to_string(completion.sgd.max_epochs);
  } else {
    const auto rank =
        Get([&] { return config.GetUnsigned("score.rank"); }).value_or(8);
    const auto seed =
        Get([&] { return config.GetUnsigned("score.seed"); }).value_or(0);
    Rng rng(seed);
    source = LowRankScores(spec.n_users, spec.n_items, rank, rng);
    provenance["source"] = "low_rank";
    provenance["score.rank"] = std::to_string(rank);
    provenance["score.seed"] = std::to_string(seed);
  }
  if (!source.SameShape(spec.n_users, spec.n_items)) {
    throw ValidationError("source matrix is " + std::to_string(source.rows()) +
                          "x" + std::to_string(source.cols()) +
                          ", spec expects " + std::to_string(spec.n_users) +
                          "x" + std::to_string(spec.n_items));
  }
  return source;
}

BenchmarkSpec SpecFromConfig(const KeyValueConfig& config,
                             std::optional<std::uint64_t> seed) {
  BenchmarkSpec spec;
  const auto violations = ApplySpecConfig(config, spec);
  if (!violations.empty()) {
    std::string msg = "invalid spec: " + violations.front();
    for (std::size_t k = 1; k < violations.size(); ++k) {
      msg += "; " + violations[k];
    }
    throw ValidationError(msg);
  }
  if (seed) spec.seed = *seed;
  return spec;
}

// ---------------------------------------------------------------------------
// Commands.

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  SourceOptions source;
};

int CmdSynth(const SynthArgs& a, std::ostream& out) {
  const KeyValueConfig config = LoadConfig(a.config);
  CheckKeys(config, [](const std::string& k) { return kSpecKeys.count(k); });
  const BenchmarkSpec spec = SpecFromConfig(config, a.seed);
  std::map<std::string, std::string> provenance;
  const RealMatrix source = LoadSource(config, spec, a.source, provenance);
  const BenchmarkInstance instance = SampleInstance(spec, source);
  WriteInstance(a.out, instance, provenance);
  WriteHeader(out, SpecHash(spec));
  out << "wrote " << a.out << '\n';
  for (const auto& w : instance.warnings) out << "warning: " << w << '\n';
  return kExitOk;
}

struct EstimateArgs {
  std::string instance;
  std::string estimators = "all";
  std::string rho_mode = "true";
  std::optional<double> rho01;
  std::optional<double> rho10;
  std::string propensities = "hat";
  std::string imputation = "mean";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int CmdEstimate(const EstimateArgs& a, std::ostream& out) {
  const KeyValueConfig config = LoadConfig(a.config);
  CheckKeys(config, [](const std::string& k) { return IsTrainKey(k); });
  const LossKind loss = LossFromConfig(config);
  const std::vector<EstimatorKind> kinds = ParseEstimatorList(a.estimators);
  const LoadedInstance inst = ReadInstance(a.instance);
  if (!inst.dataset.true_ratings) {
    throw ValidationError("instance has no r_true.csv; P* is unavailable");
  }
  if (!inst.predictions) throw ValidationError("instance has no pred.csv");

  std::optional<PropensityMatrix> p_hat;
  const double floor =
      inst.spec ? inst.spec->propensity_floor : kDefaultPropensityFloor;
  if (a.propensities == "hat") {
    if (inst.p_hat) p_hat = PropensityMatrix(*inst.p_hat, floor);
  } else if (a.propensities == "true") {
    if (inst.p_true) p_hat = PropensityMatrix(*inst.p_true, floor);
  } else {
    throw ValidationError("--propensities must be hat or true");
  }

  ErrorParams rho;
  if (a.rho_mode == "true") {
    if (!inst.spec) throw ValidationError("rho-mode true needs manifest.json");
    rho = inst.spec->rho;
  } else if (a.rho_mode == "given") {
    if (!a.rho01 || !a.rho10) {
      throw ValidationError("rho-mode given needs --rho01 and --rho10");
    }
    if (auto v = ErrorParams::Violation(*a.rho01, *a.rho10)) {
      throw ValidationError(*v);
    }
    rho = ErrorParams(*a.rho01, *a.rho10);
  } else if (a.rho_mode == "estimated") {
    AltTrainConfig alt;
    ApplyTrainConfig(config, alt);
    if (a.seed) alt.pretrain.seed = *a.seed;
    if (alt.pretrain_method != PretrainMethod::kNaive && !p_hat) {
      throw ValidationError("rho-mode estimated with " +
                            std::string(PretrainMethodName(
                                alt.pretrain_method)) +
                            " pretraining needs propensities");
    }
    const PropensityMatrix p = p_hat ? *p_hat
                                     : PropensityMatrix::Ones(
                                           inst.dataset.n_users,
                                           inst.dataset.n_items);
    const FactorModel h =
        PretrainNoisyModel(inst.dataset, alt.pretrain_method, p, alt);
    rho = IdentifyErrorParams(NoisyRateModel(h.PredictAll().values()),
                              alt.k_extreme)
              .rates;
  } else {
    throw ValidationError("--rho-mode must be true, estimated or given");
  }
  if (a.imputation != "mean" && a.imputation != "zero") {
    throw ValidationError("--imputation must be mean or zero");
  }

  const auto rows =
      EstimateAll(inst.dataset, *inst.predictions, p_hat ? &*p_hat : nullptr,
                  rho, a.imputation == "zero", loss, kinds);
  std::ofstream file;
  std::ostream* sink = &out;
  if (!a.out.empty()) {
    file = OpenReport(a.out);
    sink = &file;
  }
  *sink << std::setprecision(17);
  WriteHeader(*sink, inst.manifest_hash.empty() ? "none" : inst.manifest_hash);
  *sink << "# rho_mode=" << a.rho_mode << " rho01=" << rho.rho01()
        << " rho10=" << rho.rho10() << " propensities=" << a.propensities
        << " imputation=" << a.imputation << " loss=" << loss.ToString()
        << '\n';
  *sink << "estimator,value,p_star,re,error\n";
  WriteEstimateRows(*sink, rows);
  return kExitOk;
}

struct TrainArgs {
  std::string instance;
  std::string dataset;
  std::string method = "ome_alt";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t k = 5;
};

void WriteTrace(const fs::path& path, const std::string& hash,
                const TrainTrace& trace) {
  auto file = OpenReport(path);
  WriteHeader(file, hash);
  WriteTraceCsv(file, trace);
}

int CmdTrain(const TrainArgs& a, std::ostream& out) {
  const KeyValueConfig config = LoadConfig(a.config);
  CheckKeys(config, [](const std::string& k) {
    return IsTrainKey(k) || k == "train.propensity";
  });
  AltTrainConfig alt;
  ApplyTrainConfig(config, alt);
  if (a.seed) {
    alt.seed = *a.seed;
    alt.prediction.seed = *a.seed;
    alt.imputation.seed = *a.seed;
    alt.propensity.seed = *a.seed;
    alt.pretrain.seed = *a.seed;
  }
  if (a.instance.empty() == a.dataset.empty()) {
    throw ValidationError("give exactly one of --instance or --dataset");
  }

  // Training data and evaluation labels.
  RatingDataset train;
  std::optional<LoadedInstance> inst;
  std::vector<PairIndex> held_out;
  std::string hash;
  if (!a.instance.empty()) {
    inst = ReadInstance(a.instance);
    if (!inst->dataset.true_ratings) {
      throw ValidationError("instance has no r_true.csv for evaluation");
    }
    train = inst->dataset;
    hash = inst->manifest_hash;
  } else {
    train = ReadDatasetTriples(a.dataset);
    // Hold out 10% of O for evaluation.
    Rng rng(alt.seed);
    std::vector<PairIndex> observed;
    for (std::size_t u = 0; u < train.n_users; ++u) {
      for (std::size_t i = 0; i < train.n_items; ++i) {
        if (train.observed(u, i)) observed.push_back({u, i});
      }
    }
    Shuffle(std::span<PairIndex>(observed), rng);
    observed.resize(observed.size() / 10);
    held_out = observed;
    for (const auto& p : held_out) train.observed_mask(p.user, p.item) = 0;
  }
  hash = HashHex(Fnv1a64(hash + "|" + a.method + "|" + config.ToString() +
                         "|" + std::to_string(alt.seed)));

  const std::string p_source =
      config.GetString("train.propensity").value_or("learned");
  auto propensities = [&]() -> PropensityMatrix {
    if (p_source == "learned") {
      return TrainPropensity(train, alt.propensity)
          .PredictAll(alt.propensity_floor);
    }
    if (!inst) throw ValidationError("train.propensity needs --instance");
    if (p_source == "true" && inst->p_true) {
      return PropensityMatrix(*inst->p_true, alt.propensity_floor);
    }
    if (p_source == "hat" && inst->p_hat) {
      return PropensityMatrix(*inst->p_hat, alt.propensity_floor);
    }
    throw ValidationError("train.propensity '" + p_source +
                          "' is unavailable (learned, true or hat)");
  };

  fs::create_directories(a.out);
  FactorModel model;
  std::optional<TrainTrace> trace;
  std::optional<ErrorParams> final_rho;
  try {
    if (a.method == "naive") {
      model = TrainSupervised(train, nullptr, alt.prediction, alt.dim, alt.loss,
                              alt.validation_fraction);
    } else if (a.method == "ips") {
      const PropensityMatrix p = propensities();
      model = TrainSupervised(train, &p, alt.prediction, alt.dim, alt.loss,
                              alt.validation_fraction);
    } else if (a.method == "eib" || a.method == "dr") {
      const PropensityMatrix p =
          a.method == "eib"
              ? PropensityMatrix::Ones(train.n_users, train.n_items)
              : propensities();
      AltTrainResult r = TrainJointLearning(train, p, alt);
      model = std::move(r.prediction);
      trace = std::move(r.trace);
    } else if (a.method == "ome_alt") {
      const PropensityMatrix p = propensities();
      OmeAltResult r = TrainOmeAlt(train, alt, &p);
      model = std::move(r.alternating.prediction);
      trace = std::move(r.alternating.trace);
      if (!trace->records.empty()) {
        final_rho = ErrorParams::Clamped(trace->records.back().rho01_hat,
                                         trace->records.back().rho10_hat);
      }
    } else {
      throw ValidationError("unknown method '" + a.method +
                            "' (naive, eib, ips, dr, ome_alt)");
    }
  } catch (const AlternatingDivergence& e) {
    WriteTrace(fs::path(a.out) / "trace.csv", hash, e.trace());
    throw;
  }

  {
    std::ofstream ckpt(fs::path(a.out) / "model.ckpt");
    WriteCheckpoint(ckpt, model);
    if (!ckpt) throw std::runtime_error("cannot write model.ckpt");
  }
  if (trace) WriteTrace(fs::path(a.out) / "trace.csv", hash, *trace);

  const RealMatrix scores = model.PredictAll().values();
  RankingReport report;
  if (inst) {
    report = EvaluateRanking(scores, *inst->dataset.true_ratings, a.k);
  } else {
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    std::vector<UserRanking> users(train.n_users);
    for (const auto& p : held_out) {
      const double score = scores(p.user, p.item);
      const std::uint8_t label =
          train.observed_ratings(p.user, p.item) >= 0.5 ? 1 : 0;
      s.push_back(score);
      l.push_back(label);
      users[p.user].scores.push_back(score);
      users[p.user].labels.push_back(label);
    }
    report.k = a.k;
    report.auc = Auc(s, l);
    report.ndcg = NdcgAtK(users, a.k);
    report.recall = RecallAtK(users, a.k);
  }
  auto eval = OpenReport(fs::path(a.out) / "eval.csv");
  WriteHeader(eval, hash);
  eval << "metric,value\n";
  eval << "auc," << report.auc << '\n';
  eval << "ndcg@" << a.k << ',' << report.ndcg << '\n';
  eval << "recall@" << a.k << ',' << report.recall << '\n';
  if (final_rho) {
    eval << "rho01_hat," << final_rho->rho01() << '\n';
    eval << "rho10_hat," << final_rho->rho10() << '\n';
  }
  WriteHeader(out, hash);
  out << std::setprecision(6) << "auc=" << report.auc << " ndcg@" << a.k
      << '=' << report.ndcg << " recall@" << a.k << '=' << report.recall
      << '\n';
  if (trace) {
    for (const auto& w : trace->warnings) out << "warning: " << w << '\n';
  }
  return kExitOk;
}

struct IngestArgs {
  std::string triples;
  double threshold = 3.0;
  std::string out;
};

int CmdIngest(const IngestArgs& a, std::ostream& out) {
  std::vector<RatingTriple> triples;
  try {
    triples = ReadRawTriples(a.triples);
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
  const RatingDataset d = BinarizeTriples(triples, a.threshold);
  WriteDatasetTriples(a.out, d);
  out << "wrote " << a.out << " (" << d.NumObserved() << " ratings, "
      << d.n_users << "x" << d.n_items << ")\n";
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t seeds = 10;
  std::size_t jobs = 1;
  SourceOptions source;
};

int CmdSweep(const SweepArgs& a, std::ostream& out) {
  const KeyValueConfig config = LoadConfig(a.config);
  CheckKeys(config, [](const std::string& k) {
    return kSpecKeys.count(k) > 0 || k.rfind("sweep.", 0) == 0;
  });
  SweepOptions opts;
  opts.base = SpecFromConfig(config, std::nullopt);
  std::map<std::string, std::string> provenance;
  opts.source = LoadSource(config, opts.base, a.source, provenance);
  opts.kinds =
      ParseKindList(config.GetString("sweep.pred_kinds").value_or("all"));
  opts.estimators =
      ParseEstimatorList(config.GetString("sweep.estimators").value_or("all"));
  const std::string props =
      config.GetString("sweep.propensities").value_or("true");
  if (props != "true" && props != "hat") {
    throw ValidationError("sweep.propensities must be true or hat");
  }
  opts.true_propensities = props == "true";
  const std::string imputation =
      config.GetString("sweep.imputation").value_or("mean");
  if (imputation != "mean" && imputation != "zero") {
    throw ValidationError("sweep.imputation must be mean or zero");
  }
  opts.zero_imputation = imputation == "zero";
  const auto g01 = Get([&] { return config.GetDouble("sweep.rho01"); });
  const auto g10 = Get([&] { return config.GetDouble("sweep.rho10"); });
  if (g01.has_value() != g10.has_value()) {
    throw ValidationError("sweep.rho01 and sweep.rho10 go together");
  }
  if (g01) {
    if (auto v = ErrorParams::Violation(*g01, *g10)) throw ValidationError(*v);
    opts.given_rho = ErrorParams(*g01, *g10);
  }
  opts.loss = LossFromConfig(config);
  const std::uint64_t base = a.seed.value_or(opts.base.seed);
  for (std::size_t s = 0; s < a.seeds; ++s) opts.seeds.push_back(base + s);
  opts.jobs = std::max<std::size_t>(1, a.jobs);

  const std::vector<SweepRow> rows = RunSweep(opts);
  fs::create_directories(a.out);
  const std::string hash = HashHex(Fnv1a64(
      SpecToJson(opts.base) + "|" + config.ToString() + "|" +
      std::to_string(base) + "|" + std::to_string(a.seeds)));

  auto runs = OpenReport(fs::path(a.out) / "runs.csv");
  WriteHeader(runs, hash);
  runs << "seed,pred_kind,estimator,value,p_star,re,error\n";
  // Mean RE per (kind, estimator) over seeds without errors.
  std::map<std::pair<int, int>, std::pair<double, std::size_t>> sums;
  for (const auto& r : rows) {
    std::ostringstream prefix;
    prefix << r.seed << ',' << PredictionKindName(r.kind) << ',';
    WriteEstimateRows(runs, {r.row}, prefix.str());
    if (r.row.re) {
      auto& acc = sums[{static_cast<int>(r.kind), static_cast<int>(r.row.kind)}];
      acc.first += *r.row.re;
      ++acc.second;
    }
  }
  auto summary = OpenReport(fs::path(a.out) / "summary.csv");
  WriteHeader(summary, hash);
  summary << "pred_kind,estimator,mean_re,runs\n";
  for (const auto kind : opts.kinds) {
    for (const auto est : opts.estimators) {
      const auto it =
          sums.find({static_cast<int>(kind), static_cast<int>(est)});
      if (it == sums.end()) continue;
      summary << PredictionKindName(kind) << ',' << EstimatorName(est) << ','
              << it->second.first / static_cast<double>(it->second.second)
              << ',' << it->second.second << '\n';
    }
  }
  WriteHeader(out, hash);
  out << "wrote " << (fs::path(a.out) / "runs.csv").string() << " and "
      << (fs::path(a.out) / "summary.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

std::vector<std::string> ApplySpecConfig(const KeyValueConfig& config,
                                         BenchmarkSpec& spec) {
  std::vector<std::string> out;
  auto number = [&](const char* key, auto& field) {
    try {
      if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
        if (auto v = config.GetDouble(key)) field = *v;
      } else {
        if (auto v = config.GetUnsigned(key)) field = *v;
      }
    } catch (const ParseError& e) {
      out.push_back(e.what());
    }
  };
  number("n_users", spec.n_users);
  number("n_items", spec.n_items);
  number("p_base", spec.p_base);
  number("alpha", spec.alpha);
  number("seed", spec.seed);
  number("propensity_floor", spec.propensity_floor);
  if (auto text = config.GetString("gamma_proportions")) {
    const auto parts = SplitList(*text);
    if (parts.size() != 5) {
      out.push_back("gamma_proportions must list 5 shares");
    } else {
      for (std::size_t k = 0; k < 5; ++k) {
        KeyValueConfig one;
        one.Set("gamma_proportions", parts[k]);
        try {
          spec.gamma_proportions[k] = *one.GetDouble("gamma_proportions");
        } catch (const ParseError& e) {
          out.push_back(e.what());
        }
      }
    }
  }
  double rho01 = spec.rho.rho01();
  double rho10 = spec.rho.rho10();
  number("rho01", rho01);
  number("rho10", rho10);
  if (auto v = ErrorParams::Violation(rho01, rho10)) {
    out.push_back(*v);
  } else {
    spec.rho = ErrorParams(rho01, rho10);
  }
  if (auto text = config.GetString("pred_kind")) {
    std::string upper = *text;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    if (auto kind = ParsePredictionKind(upper)) {
      spec.pred_kind = *kind;
    } else {
      out.push_back("pred_kind: unknown kind '" + *text + "'");
    }
  }
  if (auto text = config.GetString("beta_mode")) {
    if (auto mode = ParseBetaMode(*text)) {
      spec.beta_mode = *mode;
    } else {
      out.push_back("beta_mode: must be none, per_pair or per_run");
    }
  }
  if (auto text = config.GetString("gamma_source")) {
    if (*text == "quantile") {
      spec.gamma_source = GammaSource::kQuantile;
    } else if (*text == "supplied") {
      spec.gamma_source = GammaSource::kSuppliedMatrix;
    } else {
      out.push_back("gamma_source: must be quantile or supplied");
    }
  }
  for (auto& v : ValidateBenchmarkSpec(spec)) out.push_back(std::move(v));
  return out;
}

void ApplyTrainConfig(const KeyValueConfig& config, AltTrainConfig& alt) {
  auto count = [&](const char* key, std::size_t& field) {
    if (auto v = Get([&] { return config.GetUnsigned(key); })) field = *v;
  };
  count("alt.steps_prediction", alt.steps_prediction);
  count("alt.steps_imputation", alt.steps_imputation);
  count("alt.outer_loops", alt.outer_loops);
  count("alt.k_extreme", alt.k_extreme);
  count("alt.dim", alt.dim);
  if (auto v = Get([&] { return config.GetUnsigned("alt.seed"); })) {
    alt.seed = *v;
  }
  const double r01 =
      Get([&] { return config.GetDouble("alt.rho01_init"); }).value_or(
          alt.rho_init.rho01());
  const double r10 =
      Get([&] { return config.GetDouble("alt.rho10_init"); }).value_or(
          alt.rho_init.rho10());
  if (auto v = ErrorParams::Violation(r01, r10)) {
    throw ValidationError("alt.rho_init: " + *v);
  }
  alt.rho_init = ErrorParams(r01, r10);
  if (auto v = config.GetString("alt.pretrain_method")) {
    const auto m = ParsePretrainMethod(*v);
    if (!m) throw ValidationError("alt.pretrain_method must be naive, ips or dr");
    alt.pretrain_method = *m;
  }
  if (auto v = Get([&] { return config.GetBool("alt.freeze_rho"); })) {
    alt.freeze_rho = *v;
  }
  if (auto v = Get([&] { return config.GetDouble("alt.validation_fraction"); })) {
    alt.validation_fraction = *v;
  }
  if (auto v = Get([&] { return config.GetDouble("alt.propensity_floor"); })) {
    alt.propensity_floor = *v;
  }
  alt.loss = LossFromConfig(config);
  ApplySgd(config, "prediction", alt.prediction);
  ApplySgd(config, "imputation", alt.imputation);
  ApplySgd(config, "propensity", alt.propensity);
  ApplySgd(config, "pretrain", alt.pretrain);
  try {
    ValidateAltTrainConfig(alt);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

std::vector<EstimateRow> EstimateAll(const RatingDataset& dataset,
                                     const PredictionMatrix& predictions,
                                     const PropensityMatrix* p_hat,
                                     const ErrorParams& rho,
                                     bool zero_imputation, const LossKind& loss,
                                     const std::vector<EstimatorKind>& kinds) {
  const double p_star = TrueInaccuracy(predictions, dataset, loss);
  const ImputationMatrix zero = ImputationMatrix::Constant(
      dataset.n_users, dataset.n_items, 0.0);
  const ImputationMatrix plain_mean =
      MeanObservedImputation(dataset, predictions, loss, std::nullopt);
  const ImputationMatrix ome_mean =
      MeanObservedImputation(dataset, predictions, loss, rho);
  std::vector<EstimateRow> rows;
  for (const auto kind : kinds) {
    EstimateRow row;
    row.kind = kind;
    row.p_star = p_star;
    const bool ome = NeedsErrorParams(kind);
    const ImputationMatrix* e_bar =
        zero_imputation ? &zero : (ome ? &ome_mean : &plain_mean);
    EstimatorInputs in{&dataset, &predictions, p_hat, e_bar,
                       ome ? std::optional<ErrorParams>(rho) : std::nullopt,
                       loss};
    try {
      row.value = Estimate(kind, in);
      row.re = RelativeError(p_star, *row.value);
    } catch (const MissingComponentError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> RunSweep(const SweepOptions& options) {
  struct Task {
    std::uint64_t seed;
    PredictionKind kind;
  };
  std::vector<Task> tasks;
  for (const auto seed : options.seeds) {
    for (const auto kind : options.kinds) tasks.push_back({seed, kind});
  }
  std::vector<std::vector<EstimateRow>> results(tasks.size());
  auto run = [&](std::size_t t) {
    BenchmarkSpec spec = options.base;
    spec.seed = tasks[t].seed;
    spec.pred_kind = tasks[t].kind;
    const BenchmarkInstance inst = SampleInstance(spec, options.source);
    const RatingDataset dataset = inst.ToDataset();
    const PropensityMatrix p = options.true_propensities
                                   ? inst.TruePropensities()
                                   : inst.PerturbedPropensities();
    results[t] = EstimateAll(dataset, inst.prediction_matrix, &p,
                             options.given_rho.value_or(spec.rho),
                             options.zero_imputation, options.loss,
                             options.estimators);
  };
  const std::size_t jobs = std::min(options.jobs, tasks.size());
  if (jobs <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run(t);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < tasks.size(); t += jobs) run(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<SweepRow> out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (auto& row : results[t]) {
      out.push_back({tasks[t].seed, tasks[t].kind, std::move(row)});
    }
  }
  return out;
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Noise-corrected debiased recommendation toolkit"};
  app.name("debiasrec");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a benchmark instance");
  s->add_option("--config", synth.config, "Spec config (key = value)");
  s->add_option("--out", synth.out, "Instance directory")->required();
  s->add_option("--seed", synth.seed, "Override the spec seed");
  s->add_option("--scores", synth.source.scores_csv,
                "Score matrix CSV for the quantile gamma source");
  s->add_option("--gamma", synth.source.gamma_csv,
                "Gamma matrix CSV for gamma_source = supplied");
  s->add_option("--triples", synth.source.triples,
                "Five-scale rating triples to complete by MF");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Evaluate estimators on an instance");
  e->add_option("--instance", est.instance, "Instance directory")->required();
  e->add_option("--estimators", est.estimators,
                "Comma list or 'all' (naive,eib,ips,dr,ome_eib,ome_ips,ome_dr)");
  e->add_option("--rho-mode", est.rho_mode, "true | estimated | given");
  e->add_option("--rho01", est.rho01, "Given rho01");
  e->add_option("--rho10", est.rho10, "Given rho10");
  e->add_option("--propensities", est.propensities, "hat | true");
  e->add_option("--imputation", est.imputation, "mean | zero");
  e->add_option("--config", est.config, "Training config for rho-mode estimated");
  e->add_option("--seed", est.seed, "Pretraining seed");
  e->add_option("--out", est.out, "Report CSV (default stdout)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a prediction model");
  t->add_option("--instance", train.instance, "Instance directory");
  t->add_option("--dataset", train.dataset, "Dataset triples file");
  t->add_option("--method", train.method, "naive | eib | ips | dr | ome_alt");
  t->add_option("--config", train.config, "Training config (key = value)");
  t->add_option("--seed", train.seed, "Seed for every training stage");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--k", train.k, "Cutoff for NDCG@K and Recall@K")
      ->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* g = app.add_subcommand("ingest", "Binarize raw rating triples");
  g->add_option("--triples", ingest.triples, "Raw triples file")->required();
  g->add_option("--threshold", ingest.threshold,
                "Ratings >= threshold become 1");
  g->add_option("--out", ingest.out, "Dataset triples file")->required();

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Multi-seed relative-error tables");
  w->add_option("--config", sweep.config, "Spec and sweep.* config");
  w->add_option("--out", sweep.out, "Output directory")->required();
  w->add_option("--seed", sweep.seed, "First seed");
  w->add_option("--seeds", sweep.seeds, "Number of seeds")
      ->check(CLI::PositiveNumber);
  w->add_option("--jobs", sweep.jobs, "Parallel runs")
      ->check(CLI::PositiveNumber);
  w->add_option("--scores", sweep.source.scores_csv, "Score matrix CSV");
  w->add_option("--gamma", sweep.source.gamma_csv, "Gamma matrix CSV");
  w->add_option("--triples", sweep.source.triples, "Five-scale triples");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (s->parsed()) return CmdSynth(synth, out);
    if (e->parsed()) return CmdEstimate(est, out);
    if (t->parsed()) return CmdTrain(train, out);
    if (g->parsed()) return CmdIngest(ingest, out);
    if (w->parsed()) return CmdSweep(sweep, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const TrainingDivergence& ex) {
    err << "error: training diverged: " << ex.what() << '\n';
    return kExitRuntime;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace debiasrec::cli
