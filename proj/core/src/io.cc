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

#include "debiasrec/io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace debiasrec {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::optional<double> ParseDouble(std::string_view text) {
  const std::string s = Trim(text);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<std::uint64_t> ParseUnsigned(std::string_view text) {
  const std::string s = Trim(text);
  if (s.empty()) return std::nullopt;
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

[[noreturn]] void Fail(const fs::path& path, std::size_t line,
                       const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  throw ParseError(msg.str());
}

std::ifstream OpenIn(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string_view> Split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
void WriteCsv(const fs::path& path, const Matrix<T>& m) {
  auto out = OpenOut(path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      if constexpr (std::is_same_v<T, std::uint8_t>) {
        out << static_cast<int>(m(r, c));
      } else {
        out << m(r, c);
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct TripleLine {
  std::size_t line;
  RatingTriple triple;
};

std::vector<TripleLine> ReadTripleLines(
    const fs::path& path, std::optional<std::pair<std::size_t, std::size_t>>*
                              shape) {
  auto in = OpenIn(path);
  std::vector<TripleLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::istringstream header(t.substr(1));
      std::string tag;
      std::size_t n = 0, m = 0;
      if (header >> tag && tag == "shape") {
        if (!(header >> n >> m)) Fail(path, line_no, "malformed shape header");
        if (shape != nullptr) *shape = std::make_pair(n, m);
      }
      continue;
    }
    // Tabs per the format; runs of spaces are tolerated.
    std::istringstream ss(t);
    std::vector<std::string> toks;
    for (std::string tok; ss >> tok;) toks.push_back(tok);
    if (toks.size() != 3) {
      Fail(path, line_no, "expected user<TAB>item<TAB>rating");
    }
    const auto u = ParseUnsigned(toks[0]);
    const auto i = ParseUnsigned(toks[1]);
    const auto r = ParseDouble(toks[2]);
    if (!u || !i || !r || !std::isfinite(*r)) {
      Fail(path, line_no, "malformed triple");
    }
    out.push_back({line_no, {*u, *i, *r}});
  }
  return out;
}

json SpecJson(const BenchmarkSpec& spec) {
  json j;
  j["n_users"] = spec.n_users;
  j["n_items"] = spec.n_items;
  j["gamma_proportions"] = spec.gamma_proportions;
  j["p_base"] = spec.p_base;
  j["alpha"] = spec.alpha;
  j["rho01"] = spec.rho.rho01();
  j["rho10"] = spec.rho.rho10();
  j["pred_kind"] = std::string(PredictionKindName(spec.pred_kind));
  j["beta_mode"] = std::string(BetaModeName(spec.beta_mode));
  j["seed"] = spec.seed;
  j["gamma_source"] =
      spec.gamma_source == GammaSource::kQuantile ? "quantile" : "supplied";
  j["propensity_floor"] = spec.propensity_floor;
  return j;
}

BenchmarkSpec SpecFromJsonObject(const json& j) {
  BenchmarkSpec spec;
  try {
    spec.n_users = j.at("n_users").get<std::size_t>();
    spec.n_items = j.at("n_items").get<std::size_t>();
    spec.gamma_proportions =
        j.at("gamma_proportions").get<std::array<double, 5>>();
    spec.p_base = j.at("p_base").get<double>();
    spec.alpha = j.at("alpha").get<double>();
    spec.rho = ErrorParams(j.at("rho01").get<double>(),
                           j.at("rho10").get<double>());
    const auto kind = ParsePredictionKind(j.at("pred_kind").get<std::string>());
    if (!kind) throw ParseError("manifest: unknown pred_kind");
    spec.pred_kind = *kind;
    const auto mode = ParseBetaMode(j.at("beta_mode").get<std::string>());
    if (!mode) throw ParseError("manifest: unknown beta_mode");
    spec.beta_mode = *mode;
    spec.seed = j.at("seed").get<std::uint64_t>();
    const std::string source = j.at("gamma_source").get<std::string>();
    if (source != "quantile" && source != "supplied") {
      throw ParseError("manifest: unknown gamma_source");
    }
    spec.gamma_source = source == "quantile" ? GammaSource::kQuantile
                                             : GammaSource::kSuppliedMatrix;
    spec.propensity_floor = j.at("propensity_floor").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return spec;
}

}  // namespace

void WriteMatrixCsv(const fs::path& path, const RealMatrix& m) {
  WriteCsv(path, m);
}

void WriteMatrixCsv(const fs::path& path, const BinaryMatrix& m) {
  WriteCsv(path, m);
}

RealMatrix ReadMatrixCsv(const fs::path& path) {
  auto in = OpenIn(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = Split(t, ',');
    if (rows == 0) {
      cols = fields.size();
    } else if (fields.size() != cols) {
      Fail(path, line_no, "expected " + std::to_string(cols) + " columns");
    }
    for (const auto f : fields) {
      const auto v = ParseDouble(f);
      if (!v) Fail(path, line_no, "malformed number '" + Trim(f) + "'");
      values.push_back(*v);
    }
    ++rows;
  }
  return RealMatrix(rows, cols, std::move(values));
}

BinaryMatrix ReadBinaryMatrixCsv(const fs::path& path) {
  const RealMatrix real = ReadMatrixCsv(path);
  BinaryMatrix out(real.rows(), real.cols());
  for (std::size_t k = 0; k < real.size(); ++k) {
    if (real[k] != 0.0 && real[k] != 1.0) {
      throw ParseError(path.string() + ": non-binary entry at flat index " +
                       std::to_string(k));
    }
    out[k] = real[k] == 1.0 ? 1 : 0;
  }
  return out;
}

void WriteDatasetTriples(const fs::path& path, const RatingDataset& dataset) {
  auto out = OpenOut(path);
  out << "# shape " << dataset.n_users << ' ' << dataset.n_items << '\n';
  for (std::size_t u = 0; u < dataset.n_users; ++u) {
    for (std::size_t i = 0; i < dataset.n_items; ++i) {
      if (!dataset.observed(u, i)) continue;
      out << u << '\t' << i << '\t'
          << static_cast<int>(dataset.observed_ratings(u, i)) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RatingDataset ReadDatasetTriples(const fs::path& path) {
  std::optional<std::pair<std::size_t, std::size_t>> shape;
  const auto lines = ReadTripleLines(path, &shape);
  std::size_t n = 0, m = 0;
  for (const auto& l : lines) {
    n = std::max(n, l.triple.user + 1);
    m = std::max(m, l.triple.item + 1);
  }
  if (shape) {
    if (shape->first < n || shape->second < m) {
      throw ParseError(path.string() + ": index outside the declared shape");
    }
    n = shape->first;
    m = shape->second;
  }
  if (n == 0 || m == 0) throw ParseError(path.string() + ": empty dataset");
  RatingDataset d = MakeDataset(n, m);
  for (const auto& l : lines) {
    const double r = l.triple.rating;
    if (r != 0.0 && r != 1.0) Fail(path, l.line, "rating must be 0 or 1");
    d.observed_mask(l.triple.user, l.triple.item) = 1;
    d.observed_ratings(l.triple.user, l.triple.item) = r;
  }
  return d;
}

std::vector<RatingTriple> ReadRawTriples(const fs::path& path) {
  const auto lines = ReadTripleLines(path, nullptr);
  if (lines.empty()) throw ParseError(path.string() + ": no triples");
  std::vector<RatingTriple> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(l.triple);
  return out;
}

RatingDataset BinarizeTriples(const std::vector<RatingTriple>& triples,
                              double threshold) {
  if (triples.empty()) throw std::invalid_argument("no triples");
  std::size_t n = 0, m = 0;
  for (const auto& t : triples) {
    n = std::max(n, t.user + 1);
    m = std::max(m, t.item + 1);
  }
  RatingDataset d = MakeDataset(n, m);
  for (const auto& t : triples) {
    d.observed_mask(t.user, t.item) = 1;
    d.observed_ratings(t.user, t.item) = t.rating >= threshold ? 1.0 : 0.0;
  }
  return d;
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string HashHex(std::uint64_t hash) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

std::string SpecToJson(const BenchmarkSpec& spec) {
  return SpecJson(spec).dump(2);
}

BenchmarkSpec SpecFromJson(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (j.contains("spec")) return SpecFromJsonObject(j.at("spec"));
  return SpecFromJsonObject(j);
}

std::string SpecHash(const BenchmarkSpec& spec) {
  return HashHex(Fnv1a64(SpecToJson(spec)));
}

void WriteInstance(const fs::path& dir, const BenchmarkInstance& instance,
                   const std::map<std::string, std::string>& provenance) {
  fs::create_directories(dir);
  WriteMatrixCsv(dir / "gamma.csv", instance.gamma);
  WriteMatrixCsv(dir / "pred.csv", instance.prediction_matrix.values());
  WriteMatrixCsv(dir / "p_true.csv", instance.p_true);
  WriteMatrixCsv(dir / "p_hat.csv", instance.p_hat_perturbed);
  WriteMatrixCsv(dir / "o.csv", instance.observed_mask);
  WriteMatrixCsv(dir / "r_true.csv", instance.true_ratings);
  WriteMatrixCsv(dir / "r_obs.csv", instance.observed_ratings);

  json manifest;
  manifest["spec"] = SpecJson(instance.spec);
  manifest["spec_hash"] = SpecHash(instance.spec);
  manifest["version"] = std::string(kVersion);
  manifest["warnings"] = instance.warnings;
  manifest["provenance"] = provenance;
  auto out = OpenOut(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: manifest.json");
}

LoadedInstance ReadInstance(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ParseError("not a directory: " + dir.string());
  }
  LoadedInstance out;
  if (fs::exists(dir / "manifest.json")) {
    auto in = OpenIn(dir / "manifest.json");
    std::stringstream buffer;
    buffer << in.rdbuf();
    out.spec = SpecFromJson(buffer.str());
    out.manifest_hash = SpecHash(*out.spec);
  }
  const BinaryMatrix mask = ReadBinaryMatrixCsv(dir / "o.csv");
  RealMatrix r_obs = ReadMatrixCsv(dir / "r_obs.csv");
  if (!r_obs.SameShape(mask)) {
    throw ParseError("r_obs.csv and o.csv differ in shape");
  }
  out.dataset = MakeDataset(mask.rows(), mask.cols());
  out.dataset.observed_mask = mask;
  out.dataset.observed_ratings = std::move(r_obs);
  if (fs::exists(dir / "r_true.csv")) {
    out.dataset.true_ratings = ReadMatrixCsv(dir / "r_true.csv");
  }
  if (auto v = ValidateDataset(out.dataset); !v.empty()) {
    throw ParseError(dir.string() + ": " + v.front());
  }
  auto optional_matrix = [&](const char* name) -> std::optional<RealMatrix> {
    if (!fs::exists(dir / name)) return std::nullopt;
    RealMatrix m = ReadMatrixCsv(dir / name);
    if (!m.SameShape(mask)) {
      throw ParseError(std::string(name) + " does not match o.csv in shape");
    }
    return m;
  };
  out.gamma = optional_matrix("gamma.csv");
  out.p_true = optional_matrix("p_true.csv");
  out.p_hat = optional_matrix("p_hat.csv");
  if (auto pred = optional_matrix("pred.csv")) {
    out.predictions = PredictionMatrix(std::move(*pred));
  }
  return out;
}

KeyValueConfig KeyValueConfig::Parse(std::string_view text,
                                     std::string_view source) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  for (std::string_view line : Split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string t = Trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      Fail(std::string(source), line_no, "expected key = value");
    }
    const std::string key = Trim(std::string_view(t).substr(0, eq));
    const std::string value = Trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) Fail(std::string(source), line_no, "empty key");
    if (config.values_.count(key) > 0) {
      Fail(std::string(source), line_no, "duplicate key '" + key + "'");
    }
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::Load(const fs::path& path) {
  auto in = OpenIn(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str(), path.string());
}

std::optional<std::string> KeyValueConfig::GetString(
    const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> KeyValueConfig::GetDouble(const std::string& key) const {
  const auto s = GetString(key);
  if (!s) return std::nullopt;
  const auto v = ParseDouble(*s);
  if (!v) throw ParseError(key + ": not a number: '" + *s + "'");
  return v;
}

std::optional<std::uint64_t> KeyValueConfig::GetUnsigned(
    const std::string& key) const {
  const auto s = GetString(key);
  if (!s) return std::nullopt;
  const auto v = ParseUnsigned(*s);
  if (!v) throw ParseError(key + ": not a non-negative integer: '" + *s + "'");
  return v;
}

std::optional<bool> KeyValueConfig::GetBool(const std::string& key) const {
  const auto s = GetString(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "no") return false;
  throw ParseError(key + ": not a boolean: '" + *s + "'");
}

std::string KeyValueConfig::ToString() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace debiasrec
