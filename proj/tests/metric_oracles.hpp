// Copyright 2026 The dcv-rood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Definition-level reference implementations of the ranking metrics, used as
// oracles by the unit and acceptance suites.
#ifndef DCVROOD_TESTS_METRIC_ORACLES_HPP_
#define DCVROOD_TESTS_METRIC_ORACLES_HPP_

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

#include "dcvrood/metrics.hpp"
#include "dcvrood/random.hpp"

namespace dcvrood::testing {

/// (#{o > i} + 0.5 #{o == i}) / (n_ood n_id) over all pairs.
inline double brute_auroc(const LabeledScores& ls) {
  double num = 0.0;
  for (double o : ls.ood_scores)
    for (double i : ls.id_scores) num += o > i ? 1.0 : (o == i ? 0.5 : 0.0);
  return num / (static_cast<double>(ls.ood_scores.size()) * static_cast<double>(ls.id_scores.size()));
}

/// Scans every observed score (and +inf) in increasing order and takes the
/// first threshold whose ID exceedance fraction is within the cap.
inline double sweep_tpr_at_fpr(const LabeledScores& ls, double cap) {
  std::set<double> cands(ls.id_scores.begin(), ls.id_scores.end());
  cands.insert(ls.ood_scores.begin(), ls.ood_scores.end());
  cands.insert(std::numeric_limits<double>::infinity());
  const auto n_id = static_cast<double>(ls.id_scores.size());
  for (double t : cands) {
    const auto fp = std::count_if(ls.id_scores.begin(), ls.id_scores.end(), [&](double s) { return s >= t; });
    if (static_cast<double>(fp) / n_id <= cap) {
      const auto tp = std::count_if(ls.ood_scores.begin(), ls.ood_scores.end(), [&](double s) { return s >= t; });
      return static_cast<double>(tp) / static_cast<double>(ls.ood_scores.size());
    }
  }
  return 0.0;
}

/// Random instance: sizes in [1, max_n], scores either continuous or drawn
/// from a small grid to force ties.
inline LabeledScores random_labeled_scores(std::uint64_t seed, std::size_t max_n) {
  SplitMix64 rng(seed);
  const std::size_t n_id = 1 + rng.uniform_index(max_n), n_ood = 1 + rng.uniform_index(max_n);
  const bool ties = rng.uniform_index(2) == 0;
  const double shift = rng.uniform01() * 2.0;
  auto draw = [&](double mu) {
    const double v = mu + rng.normal();
    return ties ? std::round(v * 4.0) / 4.0 : v;
  };
  LabeledScores ls;
  for (std::size_t i = 0; i < n_id; ++i) ls.id_scores.push_back(draw(0.0));
  for (std::size_t i = 0; i < n_ood; ++i) ls.ood_scores.push_back(draw(shift));
  return ls;
}

}  // namespace dcvrood::testing

#endif  // DCVROOD_TESTS_METRIC_ORACLES_HPP_
