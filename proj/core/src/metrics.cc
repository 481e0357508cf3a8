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

#include "debiasrec/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace debiasrec {
namespace {

struct UserCounts {
  double dcg = 0.0;
  double idcg = 0.0;
  std::size_t hits = 0;
  std::size_t positives = 0;
};

UserCounts CountUser(const UserRanking& user, std::size_t k) {
  if (user.scores.size() != user.labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  UserCounts c;
  for (auto l : user.labels) c.positives += (l != 0);
  const std::vector<std::size_t> order = RankItems(user.scores);
  const std::size_t depth = std::min(k, order.size());
  for (std::size_t j = 0; j < depth; ++j) {
    if (user.labels[order[j]] != 0) {
      c.dcg += 1.0 / std::log2(static_cast<double>(j) + 2.0);
      ++c.hits;
    }
  }
  const std::size_t ideal = std::min(depth, c.positives);
  for (std::size_t j = 0; j < ideal; ++j) {
    c.idcg += 1.0 / std::log2(static_cast<double>(j) + 2.0);
  }
  return c;
}

template <typename PerUser>
double MacroAverage(std::span<const UserRanking> users, std::size_t k,
                    PerUser per_user) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  double total = 0.0;
  std::size_t eligible = 0;
  for (const auto& user : users) {
    const UserCounts c = CountUser(user, k);
    if (c.positives == 0) continue;
    total += per_user(c);
    ++eligible;
  }
  if (eligible == 0) {
    throw std::invalid_argument("no user has a positive label");
  }
  return total / static_cast<double>(eligible);
}

}  // namespace

double Auc(std::span<const double> scores,
           std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Walk groups of equal score in ascending order; each positive beats every
  // negative seen in earlier groups and ties with those in its own group.
  double correct = 0.0;
  std::size_t negatives_below = 0;
  std::size_t positives = 0;
  std::size_t pos = 0;
  while (pos < order.size()) {
    std::size_t end = pos;
    std::size_t group_pos = 0, group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[pos]]) {
      (labels[order[end]] != 0 ? group_pos : group_neg) += 1;
      ++end;
    }
    correct += static_cast<double>(group_pos * negatives_below) +
               0.5 * static_cast<double>(group_pos * group_neg);
    negatives_below += group_neg;
    positives += group_pos;
    pos = end;
  }
  const std::size_t negatives = order.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("AUC needs both positive and negative labels");
  }
  return correct /
         (static_cast<double>(positives) * static_cast<double>(negatives));
}

std::vector<std::size_t> RankItems(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  return order;
}

double NdcgAtK(std::span<const UserRanking> users, std::size_t k) {
  return MacroAverage(users, k,
                      [](const UserCounts& c) { return c.dcg / c.idcg; });
}

double RecallAtK(std::span<const UserRanking> users, std::size_t k) {
  return MacroAverage(users, k, [](const UserCounts& c) {
    return static_cast<double>(c.hits) / static_cast<double>(c.positives);
  });
}

std::vector<UserRanking> UsersFromMatrices(const RealMatrix& scores,
                                           const RealMatrix& labels) {
  if (!scores.SameShape(labels)) {
    throw std::invalid_argument("scores and labels differ in shape");
  }
  std::vector<UserRanking> users(scores.rows());
  for (std::size_t u = 0; u < scores.rows(); ++u) {
    const auto s = scores.row(u);
    const auto l = labels.row(u);
    users[u].scores.assign(s.begin(), s.end());
    users[u].labels.resize(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
      users[u].labels[i] = l[i] >= 0.5 ? 1 : 0;
    }
  }
  return users;
}

RankingReport EvaluateRanking(const RealMatrix& scores,
                              const RealMatrix& labels, std::size_t k) {
  const std::vector<UserRanking> users = UsersFromMatrices(scores, labels);
  std::vector<std::uint8_t> flat_labels;
  flat_labels.reserve(labels.size());
  for (double l : labels.flat()) flat_labels.push_back(l >= 0.5 ? 1 : 0);
  RankingReport report;
  report.k = k;
  report.auc = Auc(scores.flat(), flat_labels);
  report.ndcg = NdcgAtK(users, k);
  report.recall = RecallAtK(users, k);
  return report;
}

}  // namespace debiasrec
