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

#ifndef DCVROOD_TAXONOMY_HPP_
#define DCVROOD_TAXONOMY_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dcvrood/error.hpp"

namespace dcvrood {

/// Dense row-major real matrix; row i belongs to sample i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ClassId = std::string;
using SampleId = std::string;
using LevelIndex = std::size_t;

struct ClassNode {
  LevelIndex level = 0;
  ClassId id;
  ClassId parent;  // empty at level 0
};

/// Multi-level class hierarchy (Level 1 -> ... -> S -> C -> ... -> L).
///
/// A flat dataset is a one-level taxonomy whose classification level is 0 and
/// which therefore has no strata level. Ids compare by their UTF-8 bytes.
class ClassTaxonomy {
 public:
  ClassTaxonomy(std::vector<std::string> levels, const std::vector<ClassNode>& nodes,
                LevelIndex classification_level)
      : levels_(std::move(levels)), classification_level_(classification_level) {
    if (levels_.empty()) throw Error(Errc::ManifestParse, "taxonomy needs at least one level");
    if (classification_level_ >= levels_.size())
      throw Error(Errc::ManifestParse, "classification_level " +
                                           std::to_string(classification_level_) +
                                           " is not a valid level index");
    parents_.resize(levels_.size());
    for (const ClassNode& n : nodes) {
      if (n.level >= levels_.size())
        throw Error(Errc::ManifestParse, "class '" + n.id + "' has invalid level " +
                                             std::to_string(n.level));
      if (n.id.empty()) throw Error(Errc::ManifestParse, "empty class id");
      if (!parents_[n.level].emplace(n.id, n.parent).second)
        throw Error(Errc::ManifestParse, "duplicate class id '" + n.id + "' at level " +
                                             std::to_string(n.level));
    }
    for (LevelIndex lvl = 0; lvl < levels_.size(); ++lvl) {
      for (const auto& [id, parent] : parents_[lvl]) {
        if (lvl == 0) {
          if (!parent.empty())
            throw Error(Errc::OrphanClass,
                        "level-0 class '" + id + "' must not have a parent");
        } else if (!parents_[lvl - 1].contains(parent)) {
          throw Error(Errc::OrphanClass, "class '" + id + "' at level " + std::to_string(lvl) +
                                             " has unknown parent '" + parent + "'");
        }
      }
    }
  }

  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::size_t level_count() const noexcept { return levels_.size(); }
  LevelIndex classification_level() const noexcept { return classification_level_; }
  LevelIndex deepest_level() const noexcept { return levels_.size() - 1; }

  /// Level immediately above the classification level; absent when the
  /// classification level is the top level.
  std::optional<LevelIndex> strata_level() const noexcept {
    if (classification_level_ == 0) return std::nullopt;
    return classification_level_ - 1;
  }

  bool contains(LevelIndex level, const ClassId& id) const {
    return level < parents_.size() && parents_[level].contains(id);
  }

  /// Parent id of a class (empty at level 0). Throws UnknownClass.
  const ClassId& parent_of(LevelIndex level, const ClassId& id) const {
    if (level >= parents_.size()) throw Error(Errc::UnknownClass, "invalid level");
    const auto it = parents_[level].find(id);
    if (it == parents_[level].end())
      throw Error(Errc::UnknownClass, "class '" + id + "' not at level " + std::to_string(level));
    return it->second;
  }

  /// Canonically ordered ids at a level.
  std::vector<ClassId> classes_at(LevelIndex level) const {
    std::vector<ClassId> out;
    if (level >= parents_.size()) return out;
    out.reserve(parents_[level].size());
    for (const auto& [id, parent] : parents_[level]) out.push_back(id);
    return out;  // std::map keeps byte-lexicographic order
  }

  /// Canonically ordered children of `id` (which lives at `level`).
  std::vector<ClassId> children_of(LevelIndex level, const ClassId& id) const {
    std::vector<ClassId> out;
    if (level + 1 >= parents_.size()) return out;
    for (const auto& [child, parent] : parents_[level + 1])
      if (parent == id) out.push_back(child);
    return out;
  }

  /// Nodes in (level, id) order.
  std::vector<ClassNode> nodes() const {
    std::vector<ClassNode> out;
    for (LevelIndex lvl = 0; lvl < parents_.size(); ++lvl)
      for (const auto& [id, parent] : parents_[lvl]) out.push_back({lvl, id, parent});
    return out;
  }

  /// Checks that a root-to-leaf path follows parent links.
  void validate_path(const std::vector<ClassId>& path, const SampleId& sample) const {
    if (path.size() != levels_.size())
      throw Error(Errc::ManifestParse, "sample '" + sample + "' path has " +
                                           std::to_string(path.size()) + " entries, expected " +
                                           std::to_string(levels_.size()));
    for (LevelIndex lvl = 0; lvl < path.size(); ++lvl) {
      const auto it = parents_[lvl].find(path[lvl]);
      if (it == parents_[lvl].end())
        throw Error(Errc::OrphanClass, "sample '" + sample + "' references unknown class '" +
                                           path[lvl] + "' at level " + std::to_string(lvl));
      if (lvl > 0 && it->second != path[lvl - 1])
        throw Error(Errc::OrphanClass, "sample '" + sample + "': class '" + path[lvl] +
                                           "' is not a child of '" + path[lvl - 1] + "'");
    }
  }

  friend bool operator==(const ClassTaxonomy&, const ClassTaxonomy&) = default;

 private:
  std::vector<std::string> levels_;
  std::vector<std::map<ClassId, ClassId>> parents_;
  LevelIndex classification_level_;
};

/// Lexicographically sorted class ids at a level ("c10" < "c2").
inline std::vector<ClassId> canonical_class_order(const ClassTaxonomy& t, LevelIndex level) {
  return t.classes_at(level);
}

struct SampleRecord {
  SampleId id;
  std::vector<ClassId> path;  // one class id per level, root first

  const ClassId& leaf_class() const { return path.back(); }
  const ClassId& class_at(LevelIndex level) const { return path.at(level); }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Labeled samples plus optional feature and logit payloads.
///
/// Records are kept in canonical order (by sample id bytes); payload rows are
/// permuted alongside. Immutable once constructed.
class SampleSet {
 public:
  SampleSet(std::shared_ptr<const ClassTaxonomy> taxonomy, std::vector<SampleRecord> records,
            std::optional<Matrix> features = std::nullopt,
            std::optional<Matrix> logits = std::nullopt)
      : taxonomy_(std::move(taxonomy)) {
    if (!taxonomy_) throw Error(Errc::InvalidArgument, "null taxonomy");
    const std::size_t n = records.size();
    check_payload(features, n, "features");
    check_payload(logits, n, "logits");
    for (const SampleRecord& r : records) taxonomy_->validate_path(r.path, r.id);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
    for (std::size_t i = 1; i < n; ++i)
      if (records[order[i]].id == records[order[i - 1]].id)
        throw Error(Errc::ManifestParse, "duplicate sample id '" + records[order[i]].id + "'");

    records_.reserve(n);
    for (std::size_t i : order) records_.push_back(std::move(records[i]));
    if (features) features_ = permute_rows(*features, order);
    if (logits) logits_ = permute_rows(*logits, order);
    index_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) index_.emplace(records_[i].id, i);
  }

  const ClassTaxonomy& taxonomy() const noexcept { return *taxonomy_; }
  const std::shared_ptr<const ClassTaxonomy>& taxonomy_ptr() const noexcept { return taxonomy_; }
  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::optional<Matrix>& features() const noexcept { return features_; }
  const std::optional<Matrix>& logits() const noexcept { return logits_; }

  std::optional<std::size_t> index_of(const SampleId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Distinct class ids present at a level, canonical order.
  std::vector<ClassId> present_classes(LevelIndex level) const {
    std::set<ClassId> s;
    for (const SampleRecord& r : records_) s.insert(r.class_at(level));
    return {s.begin(), s.end()};
  }

  /// Sub-set restricted to the given row indices (must be increasing).
  SampleSet subset(const std::vector<std::size_t>& rows) const {
    std::vector<SampleRecord> recs;
    recs.reserve(rows.size());
    for (std::size_t i : rows) recs.push_back(records_.at(i));
    std::optional<Matrix> f, l;
    if (features_) f = gather_rows(*features_, rows);
    if (logits_) l = gather_rows(*logits_, rows);
    return SampleSet(taxonomy_, std::move(recs), std::move(f), std::move(l));
  }

  /// Rows of `m` for the given sample ids, in the given order.
  static Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
  }

 private:
  static void check_payload(const std::optional<Matrix>& m, std::size_t n, const char* what) {
    if (!m) return;
    if (static_cast<std::size_t>(m->rows()) != n)
      throw Error(Errc::DimensionMismatch, std::string(what) + " has " +
                                               std::to_string(m->rows()) + " rows for " +
                                               std::to_string(n) + " samples");
    if (!m->allFinite()) throw Error(Errc::NonFiniteValue, std::string(what) + " contain NaN/Inf");
  }

  static Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& order) {
    return gather_rows(m, order);
  }

  std::shared_ptr<const ClassTaxonomy> taxonomy_;
  std::vector<SampleRecord> records_;
  std::optional<Matrix> features_;
  std::optional<Matrix> logits_;
  std::unordered_map<SampleId, std::size_t> index_;
};

/// Samples whose classification-level class is in `classes`, in canonical
/// order, with payload rows sliced to match.
inline SampleSet filter_by_labels(const SampleSet& s, const std::set<ClassId>& classes) {
  const ClassTaxonomy& t = s.taxonomy();
  const LevelIndex c = t.classification_level();
  for (const ClassId& id : classes)
    if (!t.contains(c, id))
      throw Error(Errc::UnknownClass, "'" + id + "' is not a class at level " + t.levels()[c]);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (classes.contains(s.records()[i].class_at(c))) rows.push_back(i);
  return s.subset(rows);
}

/// Samples whose class at an arbitrary level is in `classes`.
inline SampleSet filter_by_level(const SampleSet& s, LevelIndex level,
                                 const std::set<ClassId>& classes) {
  for (const ClassId& id : classes)
    if (!s.taxonomy().contains(level, id))
      throw Error(Errc::UnknownClass, "'" + id + "' is not a class at level " +
                                          std::to_string(level));
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (classes.contains(s.records()[i].class_at(level))) rows.push_back(i);
  return s.subset(rows);
}

}  // namespace dcvrood

#endif  // DCVROOD_TAXONOMY_HPP_
