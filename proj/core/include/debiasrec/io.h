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

// File formats: dense CSV matrices, the triple-per-line dataset format,
// benchmark instance directories with a JSON manifest, and the key-value
// config format used by the command-line driver.

#ifndef DEBIASREC_IO_H_
#define DEBIASREC_IO_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "debiasrec/core.h"
#include "debiasrec/synthbench.h"

namespace debiasrec {

inline constexpr std::string_view kVersion = "0.1.0";

// Missing or malformed input; the message names the file and line where
// known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Comma-separated rows, values printed with 17 significant digits so that a
// write/read round trip is exact.
void WriteMatrixCsv(const std::filesystem::path& path, const RealMatrix& m);
void WriteMatrixCsv(const std::filesystem::path& path, const BinaryMatrix& m);
RealMatrix ReadMatrixCsv(const std::filesystem::path& path);
BinaryMatrix ReadBinaryMatrixCsv(const std::filesystem::path& path);

// `user<TAB>item<TAB>rating`, 0-indexed. Writers emit a leading
// `# shape N M` comment; readers take the shape from it when present and
// otherwise from the largest indices seen.
void WriteDatasetTriples(const std::filesystem::path& path,
                         const RatingDataset& dataset);
RatingDataset ReadDatasetTriples(const std::filesystem::path& path);

// Real-valued triples (raw five-scale ratings before binarization).
std::vector<RatingTriple> ReadRawTriples(const std::filesystem::path& path);

// rating >= threshold -> 1, otherwise 0. Shape from the largest indices.
RatingDataset BinarizeTriples(const std::vector<RatingTriple>& triples,
                              double threshold);

// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::uint64_t Fnv1a64(std::string_view bytes);
std::string HashHex(std::uint64_t hash);

// Canonical JSON text for a spec (sorted keys, fixed precision); the
// manifest hash is Fnv1a64 of this text.
std::string SpecToJson(const BenchmarkSpec& spec);
BenchmarkSpec SpecFromJson(std::string_view json);
std::string SpecHash(const BenchmarkSpec& spec);

// Writes gamma.csv, pred.csv, p_true.csv, p_hat.csv, o.csv, r_true.csv,
// r_obs.csv and manifest.json into `dir` (created if missing). `provenance`
// entries (score source and the like) are recorded in the manifest as given.
void WriteInstance(const std::filesystem::path& dir,
                   const BenchmarkInstance& instance,
                   const std::map<std::string, std::string>& provenance = {});

// An instance directory read back. Files other than o.csv and r_obs.csv
// are optional so that partial directories can still be evaluated.
struct LoadedInstance {
  std::optional<BenchmarkSpec> spec;
  std::string manifest_hash;
  RatingDataset dataset;  // true_ratings set when r_true.csv exists
  std::optional<RealMatrix> gamma;
  std::optional<PredictionMatrix> predictions;
  std::optional<RealMatrix> p_true;
  std::optional<RealMatrix> p_hat;
};
LoadedInstance ReadInstance(const std::filesystem::path& dir);

// `key = value` per line; `#` starts a comment; keys may be dotted
// (`sgd.prediction.learning_rate`). Duplicate keys are an error.
class KeyValueConfig {
 public:
  static KeyValueConfig Parse(std::string_view text,
                              std::string_view source = "<config>");
  static KeyValueConfig Load(const std::filesystem::path& path);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> GetString(const std::string& key) const;
  // Throw ParseError naming the key when the value does not parse.
  std::optional<double> GetDouble(const std::string& key) const;
  std::optional<std::uint64_t> GetUnsigned(const std::string& key) const;
  std::optional<bool> GetBool(const std::string& key) const;

  void Set(const std::string& key, std::string value) {
    values_[key] = std::move(value);
  }
  const std::map<std::string, std::string>& values() const { return values_; }
  // Canonical `key = value` text, sorted by key.
  std::string ToString() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace debiasrec

#endif  // DEBIASREC_IO_H_
