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

#ifndef DCVROOD_DETECTORS_HPP_
#define DCVROOD_DETECTORS_HPP_

// Post-hoc OOD scorers over precomputed logits / features. Every scorer
// returns one score per row with the orientation "higher = more OOD".

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dcvrood/error.hpp"
#include "dcvrood/io.hpp"
#include "dcvrood/splitter.hpp"
#include "dcvrood/taxonomy.hpp"

namespace dcvrood {

/// Per-sample scores of one detector on one round's test samples.
struct ScoreTable {
  std::string detector_name;
  std::size_t round_index = 0;
  std::map<SampleId, double> entries;
};

/// Builds a ScoreTable from parallel id / score arrays.
inline ScoreTable make_score_table(std::string detector, std::size_t round,
                                   const std::vector<SampleId>& ids, const std::vector<double>& scores) {
  if (ids.size() != scores.size()) throw Error(Errc::DimensionMismatch, "ids and scores differ in length");
  ScoreTable t{std::move(detector), round, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(Errc::NonFiniteValue, "score for '" + ids[i] + "' is not finite");
    if (!t.entries.emplace(ids[i], scores[i]).second)
      throw Error(Errc::ExtraSample, "duplicate score for '" + ids[i] + "'");
  }
  return t;
}

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::NonFiniteValue, std::string(what) + " contain NaN/Inf");
}

inline double logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double mx = row.maxCoeff();
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace detail

// --- EBO -------------------------------------------------------------------

/// Energy score at temperature 1: -logsumexp(logits).
inline std::vector<double> score_ebo(const Matrix& logits) {
  if (logits.cols() < 2) throw Error(Errc::InvalidArgument, "EBO needs at least two logit columns");
  detail::require_finite(logits, "logits");
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    out[static_cast<std::size_t>(i)] = -detail::logsumexp(logits.row(i));
  return out;
}

// --- GEN -------------------------------------------------------------------

struct GenParams {
  double gamma = 0.1;
  std::optional<std::size_t> top_m;  // default min(100, C)
};

/// Generalized entropy over the top-M softmax probabilities:
/// sum_j p_j^gamma (1 - p_j)^gamma.
inline std::vector<double> score_gen(const Matrix& logits, GenParams params = {}) {
  const auto n_classes = static_cast<std::size_t>(logits.cols());
  if (!(params.gamma > 0.0 && params.gamma < 1.0))
    throw Error(Errc::InvalidGamma, "gamma must lie in (0,1)");
  const std::size_t m = params.top_m.value_or(std::min<std::size_t>(100, n_classes));
  if (m < 1 || m > n_classes) throw Error(Errc::InvalidTopM, "top_m must lie in [1, C]");
  detail::require_finite(logits, "logits");
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  std::vector<double> p(n_classes);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double lse = detail::logsumexp(logits.row(i));
    for (std::size_t c = 0; c < n_classes; ++c) p[c] = std::exp(logits(i, static_cast<Eigen::Index>(c)) - lse);
    std::partial_sort(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(m), p.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::pow(p[j], params.gamma) * std::pow(1.0 - p[j], params.gamma);
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

// --- KNN -------------------------------------------------------------------

inline std::size_t default_knn_neighbors(std::size_t n_train) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_train))));
  return std::max<std::size_t>(1, std::min<std::size_t>(50, root));
}

namespace detail {

inline Matrix l2_normalize_rows(const Matrix& m, const char* what) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm == 0.0) throw Error(Errc::ZeroVector, std::string(what) + " row " + std::to_string(i) + " has zero norm");
    out.row(i) /= norm;
  }
  return out;
}

}  // namespace detail

/// Distance from each L2-normalized test row to its k-th nearest
/// L2-normalized training row.
inline std::vector<double> score_knn(const Matrix& train, const Matrix& test, std::size_t k_neighbors) {
  if (train.cols() != test.cols()) throw Error(Errc::DimensionMismatch, "train/test feature widths differ");
  if (k_neighbors < 1 || k_neighbors > static_cast<std::size_t>(train.rows()))
    throw Error(Errc::KTooLarge, "k_neighbors=" + std::to_string(k_neighbors) + " with " +
                                     std::to_string(train.rows()) + " training rows");
  detail::require_finite(train, "train features");
  detail::require_finite(test, "test features");
  const Matrix tr = detail::l2_normalize_rows(train, "train features");
  const Matrix te = detail::l2_normalize_rows(test, "test features");
  // For unit rows, ||a - b||^2 = 2 - 2 a.b.
  const Matrix sims = te * tr.transpose();
  std::vector<double> out(static_cast<std::size_t>(te.rows()));
  std::vector<double> d2(static_cast<std::size_t>(tr.rows()));
  for (Eigen::Index i = 0; i < te.rows(); ++i) {
    for (Eigen::Index j = 0; j < tr.rows(); ++j)
      d2[static_cast<std::size_t>(j)] = std::max(0.0, 2.0 - 2.0 * sims(i, j));
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k_neighbors - 1), d2.end());
    out[static_cast<std::size_t>(i)] = std::sqrt(d2[k_neighbors - 1]);
  }
  return out;
}

// --- MDS -------------------------------------------------------------------

/// Class means plus one shared (tied) covariance.
struct GaussianClassModel {
  std::vector<ClassId> classes;  // canonical
  Matrix class_means;            // one row per class
  Matrix shared_covariance;
  double regularization = 0.0;
  Eigen::LLT<Eigen::MatrixXd> cholesky;
};

/// Pooled within-class covariance / (n - n_classes), plus eps*I with
/// eps = 1e-6 * trace / d (1e-6 when the scatter is identically zero).
inline GaussianClassModel fit_mds(const Matrix& train, const std::vector<ClassId>& labels) {
  if (static_cast<std::size_t>(train.rows()) != labels.size())
    throw Error(Errc::DimensionMismatch, "labels and feature rows differ");
  detail::require_finite(train, "train features");
  std::map<ClassId, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(static_cast<Eigen::Index>(i));
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no training rows");
  for (const auto& [cls, r] : rows)
    if (r.size() < 2) throw Error(Errc::ClassTooSmall, "class '" + cls + "' has fewer than 2 training samples");

  const Eigen::Index d = train.cols();
  const auto n = static_cast<double>(train.rows());
  const auto n_classes = static_cast<Eigen::Index>(rows.size());
  GaussianClassModel model;
  model.class_means.resize(n_classes, d);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index ci = 0;
  for (const auto& [cls, r] : rows) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index i : r) mean += train.row(i);
    mean /= static_cast<double>(r.size());
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(r.size()), d);
    for (std::size_t j = 0; j < r.size(); ++j) centered.row(static_cast<Eigen::Index>(j)) = train.row(r[j]) - mean;
    scatter.noalias() += centered.transpose() * centered;
    model.classes.push_back(cls);
    model.class_means.row(ci++) = mean;
  }
  Eigen::MatrixXd cov = scatter / (n - static_cast<double>(n_classes));
  cov = 0.5 * (cov + cov.transpose());
  const double trace = cov.trace();
  model.regularization = trace > 0.0 ? 1e-6 * trace / static_cast<double>(d) : 1e-6;
  cov.diagonal().array() += model.regularization;
  model.cholesky.compute(cov);
  if (model.cholesky.info() != Eigen::Success)
    throw Error(Errc::SingularCovariance, "Cholesky factorization failed after regularization");
  model.shared_covariance = cov;
  return model;
}

/// Minimum squared Mahalanobis distance to any class mean.
inline std::vector<double> score_mds(const GaussianClassModel& model, const Matrix& test) {
  if (test.cols() != model.class_means.cols())
    throw Error(Errc::DimensionMismatch, "test width " + std::to_string(test.cols()) + " vs model " +
                                             std::to_string(model.class_means.cols()));
  detail::require_finite(test, "test features");
  const auto& L = model.cholesky.matrixL();
  std::vector<double> out(static_cast<std::size_t>(test.rows()), std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 0; c < model.class_means.rows(); ++c) {
    // Solve L Z = (X - mu)^T for all test rows at once.
    Eigen::MatrixXd diff = (test.rowwise() - model.class_means.row(c)).transpose();
    L.solveInPlace(diff);
    const Eigen::VectorXd d2 = diff.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < test.rows(); ++i)
      out[static_cast<std::size_t>(i)] = std::min(out[static_cast<std::size_t>(i)], d2(i));
  }
  return out;
}

// --- External scores ---------------------------------------------------------

/// Reads `sample_id,score` CSV and checks it covers exactly the round's test
/// samples.
inline ScoreTable load_external_scores(const fs::path& path, const EvaluationRound& round,
                                       const std::string& detector_name) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::unordered_set<SampleId> expected(round.test_id.begin(), round.test_id.end());
  expected.insert(round.test_ood.begin(), round.test_ood.end());
  ScoreTable t{detector_name, round.round_index, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (lineno == 1 && !cells.empty() && cells[0] == "sample_id") continue;
    if (cells.size() != 2)
      throw Error(Errc::ManifestParse, path.string() + ":" + std::to_string(lineno) + ": expected 2 cells");
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const double v = parse_double(cells[1], where);
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, where + ": score for '" + cells[0] + "' is not finite");
    if (!expected.contains(cells[0]))
      throw Error(Errc::ExtraSample, where + ": '" + cells[0] + "' is not a test sample of round " +
                                         std::to_string(round.round_index));
    if (!t.entries.emplace(cells[0], v).second)
      throw Error(Errc::ExtraSample, where + ": duplicate score for '" + cells[0] + "'");
  }
  for (const auto* list : {&round.test_id, &round.test_ood})
    for (const SampleId& id : *list)
      if (!t.entries.contains(id)) throw Error(Errc::MissingSample, path.string() + ": no score for '" + id + "'");
  return t;
}

inline void write_scores_csv(const fs::path& path, const ScoreTable& t) {
  std::string text = "sample_id,score\n";
  for (const auto& [id, v] : t.entries) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    text += id + "," + buf + "\n";
  }
  write_text_file(path, text);
}

}  // namespace dcvrood

#endif  // DCVROOD_DETECTORS_HPP_
