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

// Ranking metrics with binary relevance. Within a user, items are ranked by
// descending score with ties broken by ascending item index; NDCG@K and
// Recall@K are macro-averaged over users with at least one positive.

#ifndef DEBIASREC_METRICS_H_
#define DEBIASREC_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "debiasrec/matrix.h"

namespace debiasrec {

// Mann-Whitney AUC: fraction of (positive, negative) pairs ordered
// correctly, ties counting one half. Throws std::invalid_argument when
// labels hold a single class or the lengths differ.
double Auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Item indices of one user's ranking, best first.
std::vector<std::size_t> RankItems(std::span<const double> scores);

struct UserRanking {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

// Throw std::invalid_argument if k == 0 or no user has a positive.
double NdcgAtK(std::span<const UserRanking> users, std::size_t k);
double RecallAtK(std::span<const UserRanking> users, std::size_t k);

// Labels are positive where the entry is >= 0.5.
std::vector<UserRanking> UsersFromMatrices(const RealMatrix& scores,
                                           const RealMatrix& labels);

struct RankingReport {
  double auc = 0.0;  // over all pairs of the matrix
  double ndcg = 0.0;
  double recall = 0.0;
  std::size_t k = 0;
};

RankingReport EvaluateRanking(const RealMatrix& scores,
                              const RealMatrix& labels, std::size_t k);

}  // namespace debiasrec

#endif  // DEBIASREC_METRICS_H_
