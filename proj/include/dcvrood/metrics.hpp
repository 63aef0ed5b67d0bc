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

#ifndef DCVROOD_METRICS_HPP_
#define DCVROOD_METRICS_HPP_

// OOD detection metrics with OOD as the positive class.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dcvrood/detectors.hpp"
#include "dcvrood/error.hpp"
#include "dcvrood/splitter.hpp"

namespace dcvrood {

struct LabeledScores {
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct MetricReport {
  double tpr5 = 0, auroc = 0, aupr = 0, f1 = 0, acc90 = 0;
  double threshold_acc90 = 0;
  std::size_t n_id = 0, n_ood = 0;
  Confusion confusion_acc90;
};

namespace detail {

inline void require_both(const LabeledScores& ls) {
  if (ls.id_scores.empty() || ls.ood_scores.empty())
    throw Error(Errc::EmptyClass, "metrics need at least one ID and one OOD score");
}

inline std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// TPR at a capped FPR. The threshold t is the smallest observed score (or
/// +inf) with #{id >= t} / n_id <= fpr_cap; returns #{ood >= t} / n_ood.
inline double tpr_at_fpr(const LabeledScores& ls, double fpr_cap = 0.05) {
  detail::require_both(ls);
  if (!(fpr_cap > 0.0 && fpr_cap < 1.0)) throw Error(Errc::InvalidArgument, "fpr_cap must lie in (0,1)");
  const auto id = detail::sorted_copy(ls.id_scores);
  const auto ood = detail::sorted_copy(ls.ood_scores);
  const std::size_t n_id = id.size();
  const auto nid = static_cast<double>(n_id);
  // Largest admissible count m of ID scores at or above the threshold.
  auto m = static_cast<std::size_t>(std::floor(fpr_cap * nid));
  while (m + 1 <= n_id && static_cast<double>(m + 1) / nid <= fpr_cap) ++m;
  while (m > 0 && static_cast<double>(m) / nid > fpr_cap) --m;
  // #{id >= t} <= m  <=>  t > (m+1)-th largest ID score.
  const double bound = id[n_id - 1 - m];
  double t = std::numeric_limits<double>::infinity();
  if (auto it = std::upper_bound(id.begin(), id.end(), bound); it != id.end()) t = std::min(t, *it);
  if (auto it = std::upper_bound(ood.begin(), ood.end(), bound); it != ood.end()) t = std::min(t, *it);
  const auto above = static_cast<std::size_t>(ood.end() - std::lower_bound(ood.begin(), ood.end(), t));
  return static_cast<double>(above) / static_cast<double>(ood.size());
}

/// P(ood > id) + 0.5 P(ood == id), from exact integer pair counts.
inline double auroc(const LabeledScores& ls) {
  detail::require_both(ls);
  const auto id = detail::sorted_copy(ls.id_scores);
  std::uint64_t twice = 0;  // 2 * #{o > i} + #{o == i}
  for (double o : ls.ood_scores) {
    const auto lo = std::lower_bound(id.begin(), id.end(), o);
    const auto hi = std::upper_bound(lo, id.end(), o);
    twice += 2 * static_cast<std::uint64_t>(lo - id.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(id.size()) * static_cast<double>(ls.ood_scores.size()));
}

/// Step-wise average precision: sum over descending distinct thresholds of
/// (recall gain) * precision, equal scores grouped at one threshold.
inline double aupr(const LabeledScores& ls) {
  detail::require_both(ls);
  std::vector<std::pair<double, bool>> all;  // (score, is_ood)
  all.reserve(ls.id_scores.size() + ls.ood_scores.size());
  for (double s : ls.id_scores) all.emplace_back(s, false);
  for (double s : ls.ood_scores) all.emplace_back(s, true);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto n_pos = static_cast<double>(ls.ood_scores.size());
  double ap = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i, group_tp = 0;
    for (; j < all.size() && all[j].first == all[i].first; ++j) {
      if (all[j].second) ++group_tp; else ++fp;
    }
    tp += group_tp;
    if (group_tp > 0) ap += static_cast<double>(group_tp) * static_cast<double>(tp) / static_cast<double>(tp + fp);
    i = j;
  }
  return std::min(1.0, ap / n_pos);
}

/// Nearest-rank q-quantile of the ID scores: the ceil(q * n)-th smallest.
inline double threshold_at_id_percentile(const LabeledScores& ls, double q = 0.90) {
  if (ls.id_scores.empty()) throw Error(Errc::EmptyClass, "no ID scores");
  if (!(q > 0.0 && q < 1.0)) throw Error(Errc::InvalidArgument, "q must lie in (0,1)");
  auto id = detail::sorted_copy(ls.id_scores);
  const double n = static_cast<double>(id.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, id.size());
  return id[rank - 1];
}

/// Predict OOD iff score > t.
inline Confusion confusion_at_threshold(const LabeledScores& ls, double t) {
  Confusion c;
  for (double s : ls.ood_scores) (s > t ? c.tp : c.fn)++;
  for (double s : ls.id_scores) (s > t ? c.fp : c.tn)++;
  return c;
}

inline double f1_from(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double accuracy_from(const Confusion& c) {
  const std::size_t n = c.tp + c.fp + c.tn + c.fn;
  return n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

/// All five metrics for one LabeledScores.
inline MetricReport evaluate_scores(const LabeledScores& ls) {
  detail::require_both(ls);
  MetricReport r;
  r.n_id = ls.id_scores.size();
  r.n_ood = ls.ood_scores.size();
  r.tpr5 = tpr_at_fpr(ls, 0.05);
  r.auroc = auroc(ls);
  r.aupr = aupr(ls);
  r.threshold_acc90 = threshold_at_id_percentile(ls, 0.90);
  r.confusion_acc90 = confusion_at_threshold(ls, r.threshold_acc90);
  r.f1 = f1_from(r.confusion_acc90);
  r.acc90 = accuracy_from(r.confusion_acc90);
  return r;
}

/// Splits a ScoreTable by round membership and evaluates it.
inline LabeledScores labeled_scores(const ScoreTable& scores, const EvaluationRound& round) {
  LabeledScores ls;
  ls.id_scores.reserve(round.test_id.size());
  ls.ood_scores.reserve(round.test_ood.size());
  auto lookup = [&](const SampleId& id) {
    const auto it = scores.entries.find(id);
    if (it == scores.entries.end())
      throw Error(Errc::MissingSample, scores.detector_name + ": no score for '" + id + "'");
    return it->second;
  };
  for (const auto& id : round.test_id) ls.id_scores.push_back(lookup(id));
  for (const auto& id : round.test_ood) ls.ood_scores.push_back(lookup(id));
  if (scores.entries.size() != round.test_id.size() + round.test_ood.size())
    throw Error(Errc::ExtraSample, scores.detector_name + ": score table has entries outside the round's test set");
  return ls;
}

inline MetricReport evaluate_round(const ScoreTable& scores, const EvaluationRound& round) {
  if (round.test_ood.empty())
    throw Error(Errc::EmptyClass, "round " + std::to_string(round.round_index) + " has no OOD test samples");
  return evaluate_scores(labeled_scores(scores, round));
}

enum class Metric { Tpr5, Auroc, Aupr, F1, Acc90 };

inline constexpr std::array<Metric, 5> kAllMetrics{Metric::Tpr5, Metric::Auroc, Metric::Aupr, Metric::F1,
                                                   Metric::Acc90};

constexpr std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::Tpr5: return "tpr5";
    case Metric::Auroc: return "auroc";
    case Metric::Aupr: return "aupr";
    case Metric::F1: return "f1";
    case Metric::Acc90: return "acc90";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics)
    if (metric_name(m) == s) return m;
  throw Error(Errc::InvalidArgument, "unknown metric '" + std::string(s) + "'");
}

constexpr double metric_value(const MetricReport& r, Metric m) noexcept {
  switch (m) {
    case Metric::Tpr5: return r.tpr5;
    case Metric::Auroc: return r.auroc;
    case Metric::Aupr: return r.aupr;
    case Metric::F1: return r.f1;
    case Metric::Acc90: return r.acc90;
  }
  return 0.0;
}

inline constexpr std::string_view kMetricCsvHeader =
    "detector,id_dataset,ood_dataset,round,tpr5,auroc,aupr,f1,acc90,threshold_acc90,n_id,n_ood";

}  // namespace dcvrood

#endif  // DCVROOD_METRICS_HPP_
