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

#include <cmath>
#include <numbers>

#include "catch2/catch_amalgamated.hpp"
#include "test_support.hpp"

using namespace dcvrood;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using dcvrood::testing::matrix;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::Io;
}

Matrix gaussian(SplitMix64& rng, Eigen::Index n, const Eigen::RowVectorXd& mean, const Eigen::MatrixXd& chol) {
  Matrix out(n, mean.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index j = 0; j < mean.size(); ++j) z(j) = rng.normal();
    out.row(i) = mean + (chol * z).transpose();
  }
  return out;
}

GaussianClassModel identity_model(const Matrix& means) {
  GaussianClassModel m;
  for (Eigen::Index c = 0; c < means.rows(); ++c) m.classes.push_back(fmt::format("c{}", c));
  m.class_means = means;
  m.shared_covariance = Eigen::MatrixXd::Identity(means.cols(), means.cols());
  m.cholesky.compute(m.shared_covariance);
  return m;
}

}  // namespace

TEST_CASE("EBO") {
  CHECK_THAT(score_ebo(matrix({{0, 0}}))[0], WithinAbs(-std::log(2.0), 1e-15));
  CHECK_THAT(score_ebo(matrix({{1000, 0}}))[0], WithinAbs(-1000.0, 1e-9));
  // High-precision oracle: -log(e + e^2 + e^3).
  CHECK_THAT(score_ebo(matrix({{1, 2, 3}}))[0], WithinAbs(-3.40760596444438030448, 1e-14));
  CHECK(code_of([] { score_ebo(matrix({{1}})); }) == Errc::InvalidArgument);
  CHECK(code_of([] { score_ebo(matrix({{1, std::nan("")}})); }) == Errc::NonFiniteValue);
  SECTION("energy moves one-for-one with a shared logit shift") {
    const auto a = score_ebo(matrix({{1, 2}}))[0], b = score_ebo(matrix({{2, 3}}))[0];
    CHECK_THAT(a - b, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("GEN") {
  SECTION("one-hot distribution scores zero") {
    CHECK_THAT(score_gen(matrix({{800, 0, 0, 0}}))[0], WithinAbs(0.0, 1e-12));
  }
  SECTION("uniform over two classes, gamma 0.5") {
    CHECK_THAT(score_gen(matrix({{0, 0}}), {0.5, 2})[0], WithinAbs(1.0, 1e-14));
  }
  SECTION("uniform maximizes the score over a probability grid") {
    for (std::size_t c = 2; c <= 5; ++c) {
      const Matrix uniform = Matrix::Zero(1, static_cast<Eigen::Index>(c));
      const double best = score_gen(uniform)[0];
      // Grid over the simplex in steps of 1/20, expressed as log-probability logits.
      const int steps = c <= 3 ? 20 : 10;
      std::vector<int> w(c, 0);
      double max_seen = -1.0;
      std::function<void(std::size_t, int)> walk = [&](std::size_t i, int left) {
        if (i + 1 == c) {
          w[i] = left;
          Matrix l(1, static_cast<Eigen::Index>(c));
          for (std::size_t j = 0; j < c; ++j)
            l(0, static_cast<Eigen::Index>(j)) = w[j] == 0 ? -800.0 : std::log(double(w[j]) / steps);
          max_seen = std::max(max_seen, score_gen(l)[0]);
          return;
        }
        for (int x = 0; x <= left; ++x) {
          w[i] = x;
          walk(i + 1, left - x);
        }
      };
      walk(0, steps);
      CHECK(max_seen <= best + 1e-12);
    }
  }
  SECTION("parameter validation") {
    CHECK(code_of([] { score_gen(matrix({{0, 1}}), {1.5, std::nullopt}); }) == Errc::InvalidGamma);
    CHECK(code_of([] { score_gen(matrix({{0, 1}}), {0.1, 3}); }) == Errc::InvalidTopM);
    CHECK(code_of([] { score_gen(matrix({{0, 1}}), {0.1, 0}); }) == Errc::InvalidTopM);
  }
  SECTION("top_m restricts the sum to the largest probabilities") {
    const Matrix l = matrix({{std::log(0.5), std::log(0.3), std::log(0.2)}});
    const double g = 0.1;
    const double expect = std::pow(0.5 * 0.5, g) + std::pow(0.3 * 0.7, g);
    CHECK_THAT(score_gen(l, {g, 2})[0], WithinRel(expect, 1e-12));
  }
}

TEST_CASE("KNN") {
  SECTION("test row equal to a training row") {
    const Matrix train = matrix({{1, 2}, {3, -1}, {0, 5}});
    CHECK_THAT(score_knn(train, matrix({{3, -1}}), 1)[0], WithinAbs(0.0, 1e-7));
  }
  SECTION("unit circle at 0, 90 and 180 degrees") {
    const Matrix train = matrix({{1, 0}, {0, 1}, {-1, 0}});
    CHECK_THAT(score_knn(train, matrix({{5, 0}}), 2)[0], WithinAbs(std::numbers::sqrt2, 1e-12));
  }
  SECTION("antipodal point stays within the normalized diameter") {
    const Matrix train = matrix({{1, 1}, {2, 2}, {3, 3.0001}});
    for (std::size_t k = 1; k <= 3; ++k) CHECK(score_knn(train, matrix({{-1, -1}}), k)[0] <= 2.0 + 1e-12);
  }
  SECTION("brute force agreement") {
    SplitMix64 rng(17);
    Matrix train(40, 5), test(7, 5);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = rng.normal();
    const auto got = score_knn(train, test, 6);
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
      std::vector<double> d;
      for (Eigen::Index j = 0; j < train.rows(); ++j)
        d.push_back((test.row(i).normalized() - train.row(j).normalized()).norm());
      std::sort(d.begin(), d.end());
      CHECK_THAT(got[static_cast<std::size_t>(i)], WithinAbs(d[5], 1e-9));
    }
  }
  SECTION("errors and defaults") {
    CHECK(code_of([] { score_knn(matrix({{1, 0}}), matrix({{1, 0}}), 2); }) == Errc::KTooLarge);
    CHECK(code_of([] { score_knn(matrix({{1, 0}}), matrix({{1, 0, 0}}), 1); }) == Errc::DimensionMismatch);
    CHECK(code_of([] { score_knn(matrix({{0, 0}}), matrix({{1, 0}}), 1); }) == Errc::ZeroVector);
    CHECK(default_knn_neighbors(10) == 4);
    CHECK(default_knn_neighbors(100) == 10);
    CHECK(default_knn_neighbors(1000000) == 50);
  }
}

TEST_CASE("MDS fit") {
  SECTION("degenerate scatter") {
    const Matrix train = matrix({{1, 2}, {1, 2}, {-3, 0}, {-3, 0}});
    const auto m = fit_mds(train, {"a", "a", "b", "b"});
    CHECK(m.class_means.row(0) == Eigen::RowVector2d(1, 2));
    CHECK(m.class_means.row(1) == Eigen::RowVector2d(-3, 0));
    CHECK(m.shared_covariance.isApprox(1e-6 * Eigen::MatrixXd::Identity(2, 2)));
  }
  SECTION("recovers a known covariance") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 2.0, 0.6, 0.6, 0.5;
    const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
    SplitMix64 rng(2026);
    const Matrix a = gaussian(rng, 5000, Eigen::RowVector2d(0, 0), chol);
    const Matrix b = gaussian(rng, 5000, Eigen::RowVector2d(5, -3), chol);
    Matrix train(10000, 2);
    train << a, b;
    std::vector<ClassId> labels(5000, "a");
    labels.resize(10000, "b");
    const auto m = fit_mds(train, labels);
    CHECK((m.shared_covariance - sigma).norm() / sigma.norm() < 0.05);
    CHECK(m.shared_covariance.isApprox(m.shared_covariance.transpose()));
  }
  SECTION("errors") {
    CHECK(code_of([] { fit_mds(matrix({{1, 2}, {3, 4}, {5, 6}}), {"a", "a", "b"}); }) == Errc::ClassTooSmall);
    CHECK(code_of([] { fit_mds(matrix({{1, 2}}), {"a", "b"}); }) == Errc::DimensionMismatch);
  }
}

TEST_CASE("MDS score") {
  SECTION("point at a class mean") {
    const auto m = identity_model(matrix({{0, 0}, {4, 0}}));
    CHECK_THAT(score_mds(m, matrix({{4, 0}}))[0], WithinAbs(0.0, 1e-15));
  }
  SECTION("identity covariance, two means") {
    const auto m = identity_model(matrix({{0, 0}, {4, 0}}));
    CHECK_THAT(score_mds(m, matrix({{1, 0}}))[0], WithinAbs(1.0, 1e-15));
  }
  SECTION("scaling features leaves scores unchanged") {
    SplitMix64 rng(4);
    Matrix train(60, 3), test(10, 3);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = 2.0 * rng.normal();
    std::vector<ClassId> labels;
    for (int i = 0; i < 60; ++i) labels.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
    const auto base = score_mds(fit_mds(train, labels), test);
    for (double c : {0.01, 7.5, 1000.0}) {
      const auto scaled = score_mds(fit_mds(c * train, labels), c * test);
      for (std::size_t i = 0; i < base.size(); ++i) CHECK_THAT(scaled[i], WithinRel(base[i], 1e-8));
    }
  }
  SECTION("width mismatch") {
    const auto m = identity_model(matrix({{0, 0}}));
    CHECK(code_of([&] { score_mds(m, matrix({{1, 2, 3}})); }) == Errc::DimensionMismatch);
  }
}

TEST_CASE("external scores") {
  const fs::path dir = fs::temp_directory_path() / "dcvrood_detectors";
  fs::create_directories(dir);
  EvaluationRound round;
  round.round_index = 2;
  round.test_id = {"a", "b"};
  round.test_ood = {"z"};

  SECTION("exact coverage accepted, header optional") {
    write_text_file(dir / "ok.csv", "sample_id,score\na,0.5\nz,3\nb,-1e-3\n");
    const auto t = load_external_scores(dir / "ok.csv", round, "ext");
    CHECK(t.entries.size() == 3);
    CHECK(t.entries.at("z") == 3.0);
    CHECK(t.round_index == 2);
    write_text_file(dir / "nohdr.csv", "a,1\nb,2\nz,3\n");
    CHECK(load_external_scores(dir / "nohdr.csv", round, "ext").entries.size() == 3);
  }
  SECTION("missing id") {
    write_text_file(dir / "missing.csv", "sample_id,score\na,0.5\nz,3\n");
    try {
      load_external_scores(dir / "missing.csv", round, "ext");
      FAIL("accepted a file without sample b");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingSample);
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
  }
  SECTION("extra id") {
    write_text_file(dir / "extra.csv", "a,1\nb,2\nz,3\nq,4\n");
    CHECK(code_of([&] { load_external_scores(dir / "extra.csv", round, "ext"); }) == Errc::ExtraSample);
  }
  SECTION("NaN") {
    write_text_file(dir / "nan.csv", "a,1\nb,NaN\nz,3\n");
    CHECK(code_of([&] { load_external_scores(dir / "nan.csv", round, "ext"); }) == Errc::NonFiniteValue);
  }
  SECTION("write and read back") {
    const auto t = make_score_table("ext", 2, {"a", "b", "z"}, {0.1, 1.0 / 3.0, -7});
    write_scores_csv(dir / "rt.csv", t);
    CHECK(load_external_scores(dir / "rt.csv", round, "ext").entries == t.entries);
  }
}

TEST_CASE("separated Gaussian families rank OOD above ID for every scorer") {
  const SynthPair p = synth_flat_pair({.separation = 6.0}, 3);
  std::vector<ClassId> labels;
  for (const auto& r : p.id.records()) labels.push_back(r.leaf_class());
  const Matrix& fi = *p.id.features();
  const Matrix& fo = *p.ood.features();
  auto mean_of = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
  CHECK(mean_of(score_mds(fit_mds(fi, labels), fo)) > mean_of(score_mds(fit_mds(fi, labels), fi)));
  CHECK(mean_of(score_knn(fi, fo, 10)) > mean_of(score_knn(fi, fi, 10)));
  CHECK(mean_of(score_ebo(*p.ood.logits())) > mean_of(score_ebo(*p.id.logits())));
  CHECK(mean_of(score_gen(*p.ood.logits())) > mean_of(score_gen(*p.id.logits())));
}
