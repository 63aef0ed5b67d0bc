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

#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "catch2/catch_amalgamated.hpp"
#include "stats_oracles.hpp"
#include "test_support.hpp"

using namespace dcvrood;
using namespace dcvrood::testing;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> normals(SplitMix64& rng, std::size_t n, double shift = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = shift + rng.normal();
  return v;
}

std::string fixture(const std::string& name) { return read_text_file(std::string(DCVROOD_FIXTURES) + "/" + name); }

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::Io;
}

}  // namespace

// Shapiro-Wilk reference values: W and p from scipy.stats.shapiro (float32
// internals) and the published Royston worked example.
TEST_CASE("Shapiro-Wilk reference values") {
  struct Case {
    std::vector<double> x;
    double w, p;
  };
  const std::vector<Case> cases{
      {{0.139, 0.157, 0.175, 0.256, 0.344, 0.413, 0.503, 0.577, 0.614, 0.655, 0.954, 1.392, 1.557,
        1.648, 1.690, 1.994, 2.174, 2.206, 3.245, 3.510, 3.571, 4.354, 4.980, 6.084, 8.351},
       0.8346662753, 0.00091349},
      {{1, 2, 4}, 0.9642857142857142, 0.6368868450},
      {{2.1, 3.4, 1.9, 5.6, 4.4}, 0.9320849392, 0.6106559023},
      {{1, 3, 2, 8, 5, 4, 9, 7, 6.5, 10, 12.5}, 0.9798044033, 0.9650654682},
      {{0.5, 1.2, 3.3, 0.7, 2.2, 8.1, 1.1, 0.9, 1.5, 2.8, 3.9, 0.2, 0.4, 6.6, 1.0, 2.4, 1.7, 0.3, 0.8, 5.5},
       0.8189070286, 0.0016770573},
  };
  for (const auto& c : cases) {
    const auto r = shapiro_wilk_test(c.x);
    CHECK_THAT(r.w, WithinAbs(c.w, 1e-6));
    CHECK_THAT(r.p_value, WithinAbs(c.p, 1e-4 * std::max(1.0, c.p) + 1e-6));
  }
}

TEST_CASE("Shapiro-Wilk calibration") {
  SplitMix64 rng(31337);
  int normal_pass = 0, expo_reject = 0;
  for (int t = 0; t < 100; ++t) {
    normal_pass += shapiro_wilk(normals(rng, 50)) > 0.05;
    std::vector<double> e(50);
    for (auto& v : e) v = -std::log(1.0 - rng.uniform01());
    expo_reject += shapiro_wilk(e) < 0.05;
  }
  CHECK(normal_pass >= 90);
  CHECK(expo_reject >= 90);
  CHECK(code_of([] { shapiro_wilk(std::vector<double>{2, 2, 2, 2}); }) == Errc::ConstantInput);
  CHECK(code_of([] { shapiro_wilk(std::vector<double>{1, 2}); }) == Errc::TooFewSamples);
}

TEST_CASE("Mann-Whitney exact") {
  CHECK_THAT(mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4}, MwuMode::Exact),
             WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(mann_whitney_u(std::vector<double>{1.5, 3.2, 0.1, 7.7, 2.4}, std::vector<double>{5.5, 6.1, 8.8, 4.2},
                            MwuMode::Exact),
             WithinAbs(0.1111111111111111, 1e-12));
  // Symmetric interleaving: U = n_x n_y / 2.
  CHECK(mann_whitney_u(std::vector<double>{1, 4, 5, 8}, std::vector<double>{2, 3, 6, 7}, MwuMode::Exact) == 1.0);
  SECTION("null counts sum to the binomial coefficient") {
    const auto c = mann_whitney_null_counts(6, 9);
    CHECK(std::accumulate(c.begin(), c.end(), std::uint64_t{0}) == 5005);
    CHECK(c.front() == 1);
    CHECK(c.back() == 1);
  }
  SECTION("large exact sizes do not overflow") {
    const auto c = mann_whitney_null_counts(33, 33);
    long double sum = 0;
    for (auto v : c) sum += static_cast<long double>(v);
    // C(66, 33) = 7219428434016265740.
    CHECK(static_cast<std::uint64_t>(sum) == 7219428434016265740ULL);
  }
  SECTION("agrees with full enumeration") {
    SplitMix64 rng(8);
    for (std::size_t nx = 1; nx <= 6; ++nx)
      for (std::size_t ny = 1; ny + nx <= 9; ++ny) {
        const auto x = normals(rng, nx), y = normals(rng, ny, 0.7);
        CHECK(mann_whitney_u(x, y, MwuMode::Exact) == enumerate_mwu_p(x, y));
      }
  }
  CHECK(code_of([] { mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{2, 3}, MwuMode::Exact); }) ==
        Errc::TiesInExactMode);
}

TEST_CASE("Mann-Whitney normal approximation") {
  // scipy.stats.mannwhitneyu(..., method="asymptotic", use_continuity=True)
  CHECK_THAT(mann_whitney_u(std::vector<double>{1.1, 2.2, 2.2, 3.5, 4.0, 5.1},
                            std::vector<double>{2.2, 3.0, 4.4, 6.0, 7.5, 8.0, 9.1}, MwuMode::Approx),
             WithinAbs(0.07255695980322559, 1e-12));
  CHECK(mann_whitney_u(std::vector<double>{3, 3, 3}, std::vector<double>{3, 3}, MwuMode::Approx) == 1.0);
  SECTION("type I error near the nominal level") {
    SplitMix64 rng(4242);
    int rejections = 0;
    for (int t = 0; t < 1000; ++t) rejections += mann_whitney_u(normals(rng, 30), normals(rng, 30)) < 0.05;
    CHECK(std::abs(rejections / 1000.0 - 0.05) <= 0.02);
  }
  SECTION("auto picks exact only for small tie-free samples") {
    const std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    CHECK(mann_whitney_u(x, y) == mann_whitney_u(x, y, MwuMode::Exact));
    const std::vector<double> xt{1, 2, 4}, yt{4, 5, 6};
    CHECK(mann_whitney_u(xt, yt) == mann_whitney_u(xt, yt, MwuMode::Approx));
  }
}

TEST_CASE("Student's t") {
  const std::vector<double> x{19.7, 20.4, 19.6, 17.8, 18.5}, y{21.3, 22.1, 20.5, 19.9, 21.7};
  CHECK_THAT(students_t(x, y), WithinAbs(0.01460623465855069, 1e-10));
  CHECK_THAT(students_t(x, y, TTestVariant::Welch), WithinAbs(0.014994330784815412, 1e-10));
  CHECK(students_t(x, x) == 1.0);
  const std::vector<double> a{1e-9, 0, 0, 0}, b{1, 1, 1, 1 + 1e-9};
  CHECK(students_t(a, b) < 1e-6);
  CHECK(code_of([] { students_t(std::vector<double>{1, 1}, std::vector<double>{1, 1}); }) == Errc::ZeroVariance);
}

TEST_CASE("pairwise matrix") {
  SECTION("identical detectors") {
    const std::vector<double> v{0.7, 0.72, 0.75, 0.69, 0.8, 0.71};
    const auto m = pairwise_matrix({{"a", "auroc", v}, {"b", "auroc", v}});
    CHECK(m.p_values[0][1] == 1.0);
    CHECK(m.p_values[1][0] == 1.0);
  }
  SECTION("eight detectors populate 28 pairs symmetrically") {
    SplitMix64 rng(5);
    std::vector<ResultVector> rv;
    for (int d = 0; d < 8; ++d) rv.push_back({fmt::format("d{}", d), "auroc", normals(rng, 12, 0.3 * d)});
    const auto m = pairwise_matrix(rv);
    int populated = 0;
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b) {
        CHECK(m.p_values[a][b] == m.p_values[b][a]);
        if (a < b) populated += m.test_used[a][b] != TestUsed::None;
      }
    CHECK(populated == 28);
  }
  SECTION("only the bi-normal pair gets the t-test") {
    boost::math::normal_distribution<> nd;
    std::vector<double> q;
    for (int i = 0; i < 12; ++i) q.push_back(boost::math::quantile(nd, (i + 0.5) / 12.0));
    std::vector<double> b = q;
    for (auto& v : b) v = 1.3 * v + 0.4;
    const std::vector<double> skew1{0, 0.01, 0.02, 0.03, 0.05, 0.06, 0.08, 0.1, 0.2, 0.5, 3, 9};
    const std::vector<double> skew2{1, 1.02, 1.03, 1.05, 1.07, 1.1, 1.15, 1.2, 1.4, 2, 5, 12};
    const auto m = pairwise_matrix({{"gen", "tpr5", q}, {"mds", "tpr5", skew1}, {"relation", "tpr5", b},
                                    {"knn", "tpr5", skew2}});
    REQUIRE(*m.normality_p[0] >= 0.05);
    REQUIRE(*m.normality_p[2] >= 0.05);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t c = a + 1; c < 4; ++c)
        CHECK(m.test_used[a][c] == ((a == 0 && c == 2) ? TestUsed::TTest : TestUsed::MannWhitney));
  }
  SECTION("constant vectors are treated as non-normal") {
    const auto m = pairwise_matrix({{"a", "f1", {1, 1, 1, 1}}, {"b", "f1", {1, 1, 1, 1}}});
    CHECK_FALSE(m.normality_p[0]);
    CHECK(m.test_used[0][1] == TestUsed::MannWhitney);
  }
}

TEST_CASE("hit and error rates from stored TPR5 tables") {
  const auto bench = significance_matrix_from_csv(fixture("tpr5_benchmark_pvalues.csv"));
  SECTION("alpha 0.1") {
    const auto counts = count_matrix_from_csv(fixture("tpr5_counts_alpha0.1.csv"), bench.detectors);
    const auto r = hit_error_rates_from_counts(bench, counts, 10, 0.1, "tpr5");
    CHECK(r.benchmark_pairs == 21);
    CHECK(r.nonbenchmark_pairs == 7);
    CHECK_THAT(*r.hit_rate, WithinAbs(207.0 / 21.0, 1e-12));
    CHECK_THAT(*r.error_rate, WithinAbs(1.0, 1e-12));
    CHECK(format_rate(r.hit_rate) == "9.8571");
    const auto [h, e] = rates_from_signed_counts(r);
    CHECK(*h == *r.hit_rate);
    CHECK(*e == *r.error_rate);
  }
  SECTION("alpha 0.05") {
    const auto counts = count_matrix_from_csv(fixture("tpr5_counts_alpha0.05.csv"), bench.detectors);
    const auto r = hit_error_rates_from_counts(bench, counts, 10, 0.05, "tpr5");
    CHECK(r.benchmark_pairs == 19);
    CHECK_THAT(*r.hit_rate, WithinAbs(187.0 / 19.0, 1e-12));
    CHECK_THAT(*r.error_rate, WithinAbs(2.0, 1e-12));
  }
}

TEST_CASE("hit and error rates from CV matrices") {
  const auto bench = significance_matrix_from_csv(fixture("tpr5_benchmark_pvalues.csv"));
  SECTION("every run reproduces the benchmark") {
    const auto r = hit_error_rates(bench, std::vector<SignificanceMatrix>(10, bench), 0.1);
    CHECK(*r.hit_rate == 10.0);
    CHECK(*r.error_rate == 0.0);
  }
  SECTION("no run is significant anywhere") {
    SignificanceMatrix flat = bench;
    for (auto& row : flat.p_values) std::fill(row.begin(), row.end(), 1.0);
    const auto r = hit_error_rates(bench, std::vector<SignificanceMatrix>(10, flat), 0.1);
    CHECK(*r.hit_rate == 0.0);
    CHECK(*r.error_rate == 0.0);
  }
  SECTION("undefined rates when a side has no pairs") {
    SignificanceMatrix none = bench;
    for (auto& row : none.p_values) std::fill(row.begin(), row.end(), 0.5);
    const auto r = hit_error_rates(none, {none}, 0.1);
    CHECK_FALSE(r.hit_rate);
    CHECK(*r.error_rate == 0.0);
    CHECK(format_rate(r.hit_rate) == "null");
  }
  SECTION("detector mismatch") {
    SignificanceMatrix other = bench;
    other.detectors[0] = "zzz";
    CHECK(code_of([&] { hit_error_rates(bench, {other}, 0.1); }) == Errc::DetectorMismatch);
  }
}

TEST_CASE("method-wise comparison") {
  SECTION("same distribution rarely flags") {
    SplitMix64 rng(99);
    int clean = 0;
    for (int t = 0; t < 100; ++t) {
      const std::vector<ResultVector> bench{{"a", "auroc", normals(rng, 20)}};
      const std::vector<std::vector<ResultVector>> cv{{{"a", "auroc", normals(rng, 20)}}};
      clean += methodwise_comparison(bench, cv, {0.01}).flagged[0].empty();
    }
    CHECK(clean >= 95);
  }
  SECTION("ten standard deviations apart flags at every alpha") {
    SplitMix64 rng(3);
    const std::vector<ResultVector> bench{{"a", "auroc", normals(rng, 10)}};
    const std::vector<std::vector<ResultVector>> cv{{{"a", "auroc", normals(rng, 10, 10.0)}}};
    const auto t = methodwise_comparison(bench, cv, {0.1, 0.05, 0.01});
    for (const auto& f : t.flagged) CHECK(f.size() == 1);
  }
  SECTION("sparse flags render as a comma-separated run list") {
    const std::vector<ResultVector> bench{{"ebo", "tpr5", {0.61, 0.64, 0.58, 0.7, 0.66, 0.6}},
                                          {"mds", "tpr5", {0.41, 0.44, 0.38, 0.5, 0.46, 0.4}}};
    std::vector<std::vector<ResultVector>> cv(10, bench);
    for (std::size_t run : {2u, 5u}) cv[run][1].values = {0.9, 0.91, 0.92, 0.93, 0.94, 0.95};
    const auto t = methodwise_comparison(bench, cv, {0.1, 0.05, 0.01}, "tpr5");
    for (const auto& f : t.flagged) CHECK(format_methodwise_cell(f) == "CV 3 (mds), CV 6 (mds)");
    CHECK(format_methodwise_cell({}) == "-");
  }
}

TEST_CASE("matrix CSV round trip and text rendering") {
  const auto bench = significance_matrix_from_csv(fixture("tpr5_benchmark_pvalues.csv"));
  const auto again = significance_matrix_from_csv(significance_matrix_csv(bench));
  CHECK(again.p_values == bench.p_values);
  const std::string text = significance_matrix_text(bench);
  CHECK(text.find("0.0301**") != std::string::npos);
  CHECK(text.find("0.0738*") != std::string::npos);
  CHECK(significance_stars(0.005) == "***");
  CHECK(significance_stars(0.2).empty());
}
