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

#ifndef DCVROOD_SPLITTER_HPP_
#define DCVROOD_SPLITTER_HPP_

// Fold construction for paired ID/OOD evaluation: stratified and group
// k-fold, flat dual folds, stratified ID/OOD class selection, hierarchical
// dual folds and round assembly.
//
// All procedures consume canonically ordered SampleSets and draw only from
// SplitMix64, so (dataset, k, seed) determines the output bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dcvrood/error.hpp"
#include "dcvrood/random.hpp"
#include "dcvrood/taxonomy.hpp"

namespace dcvrood {

enum class FoldMethod { Stratified, Group, HierarchicalOod, Random };

constexpr std::string_view fold_method_name(FoldMethod m) noexcept {
  switch (m) {
    case FoldMethod::Stratified: return "stratified";
    case FoldMethod::Group: return "group";
    case FoldMethod::HierarchicalOod: return "hierarchical-ood";
    case FoldMethod::Random: return "random";
  }
  return "unknown";
}

inline FoldMethod parse_fold_method(std::string_view s) {
  if (s == "stratified") return FoldMethod::Stratified;
  if (s == "group") return FoldMethod::Group;
  if (s == "hierarchical-ood") return FoldMethod::HierarchicalOod;
  if (s == "random") return FoldMethod::Random;
  throw Error(Errc::ManifestParse, "unknown fold method '" + std::string(s) + "'");
}

/// K-way partition of a sample set.
struct FoldAssignment {
  std::size_t k = 0;
  FoldMethod method = FoldMethod::Stratified;
  std::uint64_t seed = 0;
  std::vector<LevelIndex> levels_used;
  std::map<SampleId, std::size_t> fold_of_sample;
  std::vector<std::string> warnings;

  /// Sample ids per fold, canonical order within each fold.
  std::vector<std::vector<SampleId>> folds() const {
    std::vector<std::vector<SampleId>> out(k);
    for (const auto& [id, f] : fold_of_sample) out[f].push_back(id);
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (const auto& [id, f] : fold_of_sample) ++out[f];
    return out;
  }

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

struct SplitSpec {
  double p = 0.0;  // fraction of classification-level classes per stratum sent to OOD
  std::uint64_t seed = 0;
};

struct EvaluationRound {
  std::size_t round_index = 0;
  std::vector<SampleId> train_id, test_id, train_ood, test_ood;
};

namespace detail {

inline void check_k(std::size_t k) {
  if (k < 2) throw Error(Errc::InvalidK, "k must be >= 2, got " + std::to_string(k));
}

/// Row indices per class at `level`, classes in canonical order.
inline std::map<ClassId, std::vector<std::size_t>> rows_by_class(const SampleSet& s, LevelIndex level) {
  if (level >= s.taxonomy().level_count())
    throw Error(Errc::InvalidArgument, "level " + std::to_string(level) + " out of range");
  std::map<ClassId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < s.size(); ++i) out[s.records()[i].class_at(level)].push_back(i);
  return out;
}

/// Greedy balanced placement of whole groups: groups visited by descending
/// size (seeded shuffle breaks size ties), each to the currently smallest fold
/// (lowest index on ties).
inline std::map<ClassId, std::size_t> balance_groups(
    const std::map<ClassId, std::vector<std::size_t>>& groups, std::size_t k, std::uint64_t seed) {
  std::vector<std::pair<ClassId, std::size_t>> order;
  order.reserve(groups.size());
  for (const auto& [id, rows] : groups) order.emplace_back(id, rows.size());
  SplitMix64 rng(seed);
  seeded_shuffle(std::span(order), rng);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::size_t> load(k, 0);
  std::map<ClassId, std::size_t> fold_of_group;
  for (const auto& [id, size] : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    load[f] += size;
    fold_of_group.emplace(id, f);
  }
  return fold_of_group;
}

}  // namespace detail

/// Stratified k-fold at `level`. Within each class (rank r in canonical
/// order) the samples are shuffled and dealt round-robin starting at fold
/// r mod k, so per-class fold counts differ by at most one.
inline FoldAssignment stratified_k_fold(const SampleSet& s, LevelIndex level, std::size_t k,
                                        std::uint64_t seed) {
  detail::check_k(k);
  if (s.empty()) throw Error(Errc::EmptyDataset, "cannot split an empty dataset");
  FoldAssignment out{k, FoldMethod::Stratified, seed, {level}, {}, {}};
  SplitMix64 rng(seed);
  std::size_t rank = 0;
  for (auto& [cls, rows] : detail::rows_by_class(s, level)) {
    if (rows.size() < k)
      out.warnings.push_back("class '" + cls + "' has " + std::to_string(rows.size()) +
                             " samples, fewer than k=" + std::to_string(k) +
                             "; it cannot appear in every training fold");
    seeded_shuffle(std::span(rows), rng);
    for (std::size_t j = 0; j < rows.size(); ++j)
      out.fold_of_sample.emplace(s.records()[rows[j]].id, (rank + j) % k);
    ++rank;
  }
  return out;
}

/// Plain shuffled k-fold, ignoring labels.
inline FoldAssignment random_k_fold(const SampleSet& s, std::size_t k, std::uint64_t seed) {
  detail::check_k(k);
  if (s.empty()) throw Error(Errc::EmptyDataset, "cannot split an empty dataset");
  std::vector<std::size_t> rows(s.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  SplitMix64 rng(seed);
  seeded_shuffle(std::span(rows), rng);
  FoldAssignment out{k, FoldMethod::Random, seed, {}, {}, {}};
  for (std::size_t j = 0; j < rows.size(); ++j) out.fold_of_sample.emplace(s.records()[rows[j]].id, j % k);
  return out;
}

/// Group k-fold: every class at `level` lands wholly in one fold.
inline FoldAssignment group_k_fold(const SampleSet& s, LevelIndex level, std::size_t k,
                                   std::uint64_t seed) {
  detail::check_k(k);
  const auto groups = detail::rows_by_class(s, level);
  if (groups.size() < k)
    throw Error(Errc::TooFewGroups, std::to_string(groups.size()) + " classes at level " +
                                        std::to_string(level) + " for k=" + std::to_string(k));
  const auto fold_of_group = detail::balance_groups(groups, k, seed);
  FoldAssignment out{k, FoldMethod::Group, seed, {level}, {}, {}};
  for (const auto& [cls, rows] : groups)
    for (std::size_t i : rows) out.fold_of_sample.emplace(s.records()[i].id, fold_of_group.at(cls));
  return out;
}

enum class IdFolding { Stratified, Random };

/// Flat dual folds: stratified folds over ID samples at the classification
/// level, group folds over OOD classes.
inline std::pair<FoldAssignment, FoldAssignment> build_folds_flat(
    const SampleSet& d_id, const SampleSet& d_ood, std::size_t k, std::uint64_t seed,
    IdFolding id_folding = IdFolding::Stratified) {
  detail::check_k(k);
  const LevelIndex c_id = d_id.taxonomy().classification_level();
  const LevelIndex c_ood = d_ood.taxonomy().classification_level();
  const auto id_classes = d_id.present_classes(c_id);
  for (const ClassId& c : d_ood.present_classes(c_ood))
    if (std::binary_search(id_classes.begin(), id_classes.end(), c))
      throw Error(Errc::ClassOverlap, "class '" + c + "' appears in both ID and OOD data");
  FoldAssignment f_id = id_folding == IdFolding::Stratified ? stratified_k_fold(d_id, c_id, k, seed)
                                                            : random_k_fold(d_id, k, seed);
  return {std::move(f_id), group_k_fold(d_ood, c_ood, k, seed)};
}

struct IdOodSplit {
  SampleSet id;
  SampleSet ood;
  std::vector<ClassId> id_classes;   // canonical
  std::vector<ClassId> ood_classes;  // canonical
  std::vector<std::string> warnings;
};

/// Per stratum S_i with N_i classification-level classes, floor(p * N_i)
/// classes are drawn without replacement into OOD; the rest are ID.
inline IdOodSplit select_id_ood_split(const SampleSet& h, const SplitSpec& spec) {
  if (!(spec.p >= 0.0 && spec.p <= 1.0))
    throw Error(Errc::InvalidArgument, "p must lie in [0,1]");
  const ClassTaxonomy& t = h.taxonomy();
  const auto strata = t.strata_level();
  if (!strata) throw Error(Errc::NoStrataLevel, "taxonomy has no level above the classification level");
  SplitMix64 rng(spec.seed);
  std::set<ClassId> id_set, ood_set;
  std::vector<std::string> warnings;
  for (const ClassId& stratum : t.classes_at(*strata)) {
    std::vector<ClassId> members = t.children_of(*strata, stratum);
    const std::size_t n_i = members.size();
    // Guard against p * N_i landing a hair under an integer.
    const auto k_i = static_cast<std::size_t>(std::floor(spec.p * static_cast<double>(n_i) + 1e-9));
    if (k_i == 0 && spec.p > 0.0 && n_i > 0)
      warnings.push_back("stratum '" + stratum + "' has " + std::to_string(n_i) +
                         " classes; floor(p*N) = 0 so it contributes no OOD classes");
    seeded_shuffle(std::span(members), rng);
    for (std::size_t j = 0; j < n_i; ++j) (j < k_i ? ood_set : id_set).insert(members[j]);
  }
  IdOodSplit out{filter_by_labels(h, id_set), filter_by_labels(h, ood_set),
                 {id_set.begin(), id_set.end()}, {ood_set.begin(), ood_set.end()}, std::move(warnings)};
  return out;
}

/// Index-wise union of fold systems over disjoint samples.
inline FoldAssignment join_by_fold(const std::vector<FoldAssignment>& parts) {
  if (parts.empty()) throw Error(Errc::InvalidArgument, "join_by_fold needs at least one part");
  FoldAssignment out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].k != out.k) throw Error(Errc::KMismatch, "parts have different k");
    for (const auto& [id, f] : parts[p].fold_of_sample)
      if (!out.fold_of_sample.emplace(id, f).second)
        throw Error(Errc::SampleOverlap, "sample '" + id + "' appears in more than one part");
    out.warnings.insert(out.warnings.end(), parts[p].warnings.begin(), parts[p].warnings.end());
  }
  return out;
}

/// Hierarchical dual folds. ID: stratified over the deepest level. OOD: group
/// k-fold at the classification level inside each stratum, joined index-wise.
///
/// A stratum with fewer than k OOD classes cannot be group-split; its classes
/// go to distinct folds taken from a cursor shared by all such strata, and a
/// StratumUnderfilled warning is recorded.
inline std::pair<FoldAssignment, FoldAssignment> build_folds_hierarchical(
    const SampleSet& h_id, const SampleSet& h_ood, std::size_t k, std::uint64_t seed) {
  detail::check_k(k);
  const ClassTaxonomy& t = h_id.taxonomy();
  if (!(t == h_ood.taxonomy()))
    throw Error(Errc::TaxonomyMismatch, "ID and OOD splits must share one taxonomy");
  const auto strata = t.strata_level();
  if (!strata) throw Error(Errc::NoStrataLevel, "taxonomy has no strata level");
  const LevelIndex c = t.classification_level();

  FoldAssignment f_id = stratified_k_fold(h_id, t.deepest_level(), k, seed);

  std::vector<FoldAssignment> parts;
  std::vector<std::string> warnings;
  std::size_t cursor = 0;
  std::uint64_t stratum_index = 0;
  for (const ClassId& stratum : h_ood.present_classes(*strata)) {
    const SampleSet sub = filter_by_level(h_ood, *strata, {stratum});
    const std::uint64_t sub_seed = derive_seed(seed, "stratum", stratum_index++);
    const auto groups = detail::rows_by_class(sub, c);
    if (groups.size() >= k) {
      parts.push_back(group_k_fold(sub, c, k, sub_seed));
      continue;
    }
    warnings.push_back("StratumUnderfilled: stratum '" + stratum + "' has " +
                       std::to_string(groups.size()) + " OOD classes for k=" + std::to_string(k) +
                       "; it is absent from " + std::to_string(k - groups.size()) + " folds");
    std::vector<ClassId> order;
    for (const auto& [cls, rows] : groups) order.push_back(cls);
    SplitMix64 rng(sub_seed);
    seeded_shuffle(std::span(order), rng);
    FoldAssignment part{k, FoldMethod::Group, sub_seed, {c}, {}, {}};
    for (const ClassId& cls : order) {
      for (std::size_t i : groups.at(cls)) part.fold_of_sample.emplace(sub.records()[i].id, cursor);
      cursor = (cursor + 1) % k;
    }
    parts.push_back(std::move(part));
  }
  if (parts.empty()) throw Error(Errc::EmptyDataset, "OOD split is empty");
  FoldAssignment f_ood = join_by_fold(parts);
  f_ood.method = FoldMethod::HierarchicalOod;
  f_ood.seed = seed;
  f_ood.levels_used = {*strata, c};
  f_ood.warnings.insert(f_ood.warnings.begin(), warnings.begin(), warnings.end());
  return {std::move(f_id), std::move(f_ood)};
}

/// K rounds: fold r of each assignment is the test set, the rest train.
inline std::vector<EvaluationRound> assemble_rounds(const FoldAssignment& f_id, const FoldAssignment& f_ood) {
  if (f_id.k != f_ood.k) throw Error(Errc::KMismatch, "ID and OOD fold counts differ");
  std::vector<EvaluationRound> rounds(f_id.k);
  for (std::size_t r = 0; r < f_id.k; ++r) rounds[r].round_index = r;
  for (const auto& [id, f] : f_id.fold_of_sample)
    for (std::size_t r = 0; r < f_id.k; ++r) (r == f ? rounds[r].test_id : rounds[r].train_id).push_back(id);
  for (const auto& [id, f] : f_ood.fold_of_sample)
    for (std::size_t r = 0; r < f_ood.k; ++r) (r == f ? rounds[r].test_ood : rounds[r].train_ood).push_back(id);
  return rounds;
}

// ---------------------------------------------------------------------------
// Folds manifest: {algorithm, seed, k, levels_used, folds, warnings}

inline nlohmann::json folds_to_json(const FoldAssignment& f) {
  nlohmann::json j;
  j["algorithm"] = std::string(fold_method_name(f.method));
  j["seed"] = f.seed;
  j["k"] = f.k;
  j["levels_used"] = f.levels_used;
  j["folds"] = f.folds();
  j["warnings"] = f.warnings;
  return j;
}

inline std::string folds_manifest_string(const FoldAssignment& f) { return folds_to_json(f).dump(2) + "\n"; }

inline FoldAssignment folds_from_json(const nlohmann::json& j) {
  try {
    FoldAssignment f;
    f.method = parse_fold_method(j.at("algorithm").get<std::string>());
    f.seed = j.at("seed").get<std::uint64_t>();
    f.k = j.at("k").get<std::size_t>();
    f.levels_used = j.at("levels_used").get<std::vector<LevelIndex>>();
    f.warnings = j.value("warnings", std::vector<std::string>{});
    const auto folds = j.at("folds").get<std::vector<std::vector<std::string>>>();
    if (folds.size() != f.k) throw Error(Errc::KMismatch, "folds manifest lists " + std::to_string(folds.size()) + " folds for k=" + std::to_string(f.k));
    for (std::size_t r = 0; r < folds.size(); ++r)
      for (const auto& id : folds[r])
        if (!f.fold_of_sample.emplace(id, r).second)
          throw Error(Errc::SampleOverlap, "sample '" + id + "' listed in two folds");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ManifestParse, std::string("folds manifest: ") + e.what());
  }
}

}  // namespace dcvrood

#endif  // DCVROOD_SPLITTER_HPP_
