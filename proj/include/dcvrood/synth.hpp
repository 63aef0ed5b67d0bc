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

#ifndef DCVROOD_SYNTH_HPP_
#define DCVROOD_SYNTH_HPP_

// Seeded synthetic Gaussian fixtures for desk-scale runs.
//
// Flat pairs: ID class c has mean radius * e_c; each OOD class starts from an
// ID class mean and moves `separation` toward the ID centroid (so it sits
// between ID classes), plus a class-specific offset of norm 0.3 * separation
// in the dimensions not used by class means. separation = 0 makes the two
// families identical in distribution.
//
// Hierarchical dataset: superclass -> class -> subclass, 2 x 5 x 5 by
// default, classification at the subclass level.
//
// Logits are prototype logits, -||x - mu_c||^2 / (2 * temperature), over the
// ID classes (flat) or over every subclass (hierarchical).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dcvrood/random.hpp"
#include "dcvrood/taxonomy.hpp"

namespace dcvrood {

struct SynthFlatOptions {
  std::size_t dim = 16;
  std::size_t id_classes = 5;
  std::size_t ood_classes = 10;
  std::size_t id_per_class = 200;
  std::size_t ood_per_class = 50;
  double radius = 4.0;
  double separation = 2.0;
  double temperature = 4.0;
  std::string id_prefix = "id";
  std::string ood_prefix = "ood";
};

struct SynthHierOptions {
  std::size_t dim = 32;
  std::size_t superclasses = 2;
  std::size_t classes_per_super = 5;
  std::size_t subclasses_per_class = 5;
  std::size_t per_subclass = 40;
  double super_spread = 6.0;
  double class_spread = 3.0;
  double subclass_spread = 2.0;
  double temperature = 4.0;
  std::string prefix = "h";
};

struct SynthPair {
  SampleSet id;
  SampleSet ood;
};

namespace detail {

inline Eigen::RowVectorXd random_unit(SplitMix64& rng, Eigen::Index dim, Eigen::Index from = 0) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(dim);
  for (Eigen::Index i = from; i < dim; ++i) v(i) = rng.normal();
  const double n = v.norm();
  return n > 0 ? Eigen::RowVectorXd(v / n) : v;
}

inline Matrix prototype_logits(const Matrix& x, const Matrix& means, double temperature) {
  Matrix out(x.rows(), means.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < means.rows(); ++c)
      out(i, c) = -(x.row(i) - means.row(c)).squaredNorm() / (2.0 * temperature);
  return out;
}

inline std::shared_ptr<const ClassTaxonomy> flat_taxonomy(const std::vector<ClassId>& classes) {
  std::vector<ClassNode> nodes;
  for (const auto& c : classes) nodes.push_back({0, c, ""});
  return std::make_shared<const ClassTaxonomy>(std::vector<std::string>{"class"}, nodes, 0);
}

}  // namespace detail

inline SynthPair synth_flat_pair(const SynthFlatOptions& o, std::uint64_t seed) {
  if (o.dim < o.id_classes) throw Error(Errc::InvalidArgument, "dim must be >= id_classes");
  const auto d = static_cast<Eigen::Index>(o.dim);
  const auto c_id = static_cast<Eigen::Index>(o.id_classes);
  SplitMix64 rng(seed);

  Matrix id_means = Matrix::Zero(c_id, d);
  for (Eigen::Index c = 0; c < c_id; ++c) id_means(c, c) = o.radius;
  const Eigen::RowVectorXd centroid = id_means.colwise().mean();

  Matrix ood_means(static_cast<Eigen::Index>(o.ood_classes), d);
  for (std::size_t j = 0; j < o.ood_classes; ++j) {
    const Eigen::RowVectorXd base = id_means.row(static_cast<Eigen::Index>(j % o.id_classes));
    Eigen::RowVectorXd toward = centroid - base;
    toward /= toward.norm();
    const Eigen::RowVectorXd jitter = detail::random_unit(rng, d, c_id) * (0.3 * o.separation);
    ood_means.row(static_cast<Eigen::Index>(j)) = base + o.separation * toward + jitter;
  }

  auto sample_family = [&](const Matrix& means, std::size_t per_class, const std::string& prefix,
                           std::vector<ClassId>& class_ids) {
    const std::size_t n = per_class * static_cast<std::size_t>(means.rows());
    Matrix x(static_cast<Eigen::Index>(n), d);
    std::vector<SampleRecord> recs;
    recs.reserve(n);
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
      class_ids.push_back(fmt::format("{}_c{:03}", prefix, c));
      for (std::size_t s = 0; s < per_class; ++s) {
        const auto row = static_cast<Eigen::Index>(static_cast<std::size_t>(c) * per_class + s);
        for (Eigen::Index k = 0; k < d; ++k) x(row, k) = means(c, k) + rng.normal();
        recs.push_back({fmt::format("{}_c{:03}_s{:05}", prefix, c, s), {class_ids.back()}});
      }
    }
    return std::pair{std::move(x), std::move(recs)};
  };

  std::vector<ClassId> id_classes, ood_classes;
  auto [x_id, r_id] = sample_family(id_means, o.id_per_class, o.id_prefix, id_classes);
  auto [x_ood, r_ood] = sample_family(ood_means, o.ood_per_class, o.ood_prefix, ood_classes);
  Matrix l_id = detail::prototype_logits(x_id, id_means, o.temperature);
  Matrix l_ood = detail::prototype_logits(x_ood, id_means, o.temperature);
  return {SampleSet(detail::flat_taxonomy(id_classes), std::move(r_id), std::move(x_id), std::move(l_id)),
          SampleSet(detail::flat_taxonomy(ood_classes), std::move(r_ood), std::move(x_ood), std::move(l_ood))};
}

/// Hierarchical dataset; logits cover every subclass in canonical order.
inline SampleSet synth_hierarchical(const SynthHierOptions& o, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(o.dim);
  SplitMix64 rng(seed);
  std::vector<ClassNode> nodes;
  std::vector<std::pair<ClassId, std::vector<ClassId>>> leaves;  // subclass id, path
  std::vector<Eigen::RowVectorXd> leaf_means;
  for (std::size_t s = 0; s < o.superclasses; ++s) {
    const ClassId sid = fmt::format("{}_s{}", o.prefix, s);
    nodes.push_back({0, sid, ""});
    const Eigen::RowVectorXd smean = detail::random_unit(rng, d) * o.super_spread;
    for (std::size_t c = 0; c < o.classes_per_super; ++c) {
      const ClassId cid = fmt::format("{}_s{}_c{}", o.prefix, s, c);
      nodes.push_back({1, cid, sid});
      const Eigen::RowVectorXd cmean = smean + detail::random_unit(rng, d) * o.class_spread;
      for (std::size_t u = 0; u < o.subclasses_per_class; ++u) {
        const ClassId uid = fmt::format("{}_s{}_c{}_u{}", o.prefix, s, c, u);
        nodes.push_back({2, uid, cid});
        leaves.push_back({uid, {sid, cid, uid}});
        leaf_means.push_back(cmean + detail::random_unit(rng, d) * o.subclass_spread);
      }
    }
  }
  auto taxonomy = std::make_shared<const ClassTaxonomy>(
      std::vector<std::string>{"superclass", "class", "subclass"}, nodes, 2);

  // Logit columns follow canonical subclass order.
  const auto canon = taxonomy->classes_at(2);
  Matrix means(static_cast<Eigen::Index>(leaves.size()), d);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto pos = std::lower_bound(canon.begin(), canon.end(), leaves[i].first) - canon.begin();
    means.row(pos) = leaf_means[i];
  }
  const std::size_t n = leaves.size() * o.per_subclass;
  Matrix x(static_cast<Eigen::Index>(n), d);
  std::vector<SampleRecord> recs;
  recs.reserve(n);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    for (std::size_t s = 0; s < o.per_subclass; ++s) {
      const auto row = static_cast<Eigen::Index>(i * o.per_subclass + s);
      for (Eigen::Index k = 0; k < d; ++k) x(row, k) = leaf_means[i](k) + rng.normal();
      recs.push_back({fmt::format("{}_x{:05}", leaves[i].first, s), leaves[i].second});
    }
  Matrix logits = detail::prototype_logits(x, means, o.temperature);
  return SampleSet(std::move(taxonomy), std::move(recs), std::move(x), std::move(logits));
}

}  // namespace dcvrood

#endif  // DCVROOD_SYNTH_HPP_
