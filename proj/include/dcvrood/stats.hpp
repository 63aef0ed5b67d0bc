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

#ifndef DCVROOD_STATS_HPP_
#define DCVROOD_STATS_HPP_

// Normality and two-sample tests, detector-by-detector significance
// matrices, and the fidelity analyses that compare cross-validated results
// against a repeated-split benchmark.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dcvrood/error.hpp"

namespace dcvrood {

namespace detail {

inline constexpr double kMinPValue = std::numeric_limits<double>::min();

inline double clamp_p(double p) { return std::clamp(p, kMinPValue, 1.0); }

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

template <std::size_t N>
double poly(const double (&c)[N], double x) {
  double r = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) r = r * x + c[i];
  return r;
}

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

// --- Shapiro-Wilk ------------------------------------------------------------

struct ShapiroWilkResult {
  double w = 0.0;
  double p_value = 1.0;
};

/// Shapiro-Wilk W with Royston's (1995, AS R94) coefficient and p-value
/// approximations. Valid for 3 <= n <= 5000.
inline ShapiroWilkResult shapiro_wilk_test(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(Errc::TooFewSamples, "Shapiro-Wilk needs n >= 3");
  if (n > 5000) throw Error(Errc::InvalidArgument, "Shapiro-Wilk supports n <= 5000");
  std::vector<double> x(values.begin(), values.end());
  for (double v : x)
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "Shapiro-Wilk input is not finite");
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw Error(Errc::ConstantInput, "Shapiro-Wilk input has zero variance");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const auto an = static_cast<double>(n);
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = detail::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first = 1;
    double fac = 0.0;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double mean = detail::mean_of(x);
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double w = std::min(1.0, num * num / ssq);

  ShapiroWilkResult r{w, 1.0};
  if (n == 3) {
    constexpr double six_over_pi = 6.0 / std::numbers::pi;
    constexpr double asin_sqrt_three_quarters = std::numbers::pi / 3.0;
    r.p_value = detail::clamp_p(six_over_pi * (std::asin(std::sqrt(w)) - asin_sqrt_three_quarters));
    return r;
  }
  if (w >= 1.0) return r;
  double y = std::log(1.0 - w);
  double mu = 0.0, sigma = 1.0;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (y >= gamma) {
      r.p_value = detail::kMinPValue;
      return r;
    }
    y = -std::log(gamma - y);
    mu = detail::poly(c3, an);
    sigma = std::exp(detail::poly(c4, an));
  } else {
    const double ln = std::log(an);
    mu = detail::poly(c5, ln);
    sigma = std::exp(detail::poly(c6, ln));
  }
  r.p_value = detail::clamp_p(detail::normal_upper_tail((y - mu) / sigma));
  return r;
}

inline double shapiro_wilk(std::span<const double> values) { return shapiro_wilk_test(values).p_value; }

// --- Mann-Whitney U ------------------------------------------------------------

enum class MwuMode { Exact, Approx, Auto };

/// Largest pooled size handled exactly; the null counts stay below 2^64.
inline constexpr std::size_t kMaxExactMwu = 66;

/// Null distribution of U for sample sizes (m, n): count[u] = number of
/// labelings of m+n distinct ranks with U = u.
inline std::vector<std::uint64_t> mann_whitney_null_counts(std::size_t m, std::size_t n) {
  const std::size_t max_u = m * n;
  // dp[j][u]: ways to place j x-items among the positions seen so far.
  std::vector<std::vector<std::uint64_t>> dp(m + 1, std::vector<std::uint64_t>(max_u + 1, 0));
  dp[0][0] = 1;
  for (std::size_t pos = 0; pos < m + n; ++pos) {
    for (std::size_t j = std::min(m, pos + 1); j-- > 0;) {
      if (pos < j) continue;
      const std::size_t ys_before = pos - j;
      if (ys_before > n) continue;
      for (std::size_t u = 0; u + ys_before <= max_u; ++u)
        if (dp[j][u] != 0) dp[j + 1][u + ys_before] += dp[j][u];
    }
  }
  return dp[m];
}

namespace detail {

/// U for x: #{x_i > y_j} + 0.5 #{x_i == y_j}, returned doubled to stay integral.
inline std::uint64_t twice_u(std::span<const double> x, std::span<const double> y) {
  std::vector<double> ys(y.begin(), y.end());
  std::sort(ys.begin(), ys.end());
  std::uint64_t t = 0;
  for (double v : x) {
    const auto lo = std::lower_bound(ys.begin(), ys.end(), v);
    const auto hi = std::upper_bound(lo, ys.end(), v);
    t += 2 * static_cast<std::uint64_t>(lo - ys.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return t;
}

inline bool has_ties(std::span<const double> x, std::span<const double> y) {
  std::vector<double> all(x.begin(), x.end());
  all.insert(all.end(), y.begin(), y.end());
  std::sort(all.begin(), all.end());
  return std::adjacent_find(all.begin(), all.end()) != all.end();
}

}  // namespace detail

/// Two-sided Mann-Whitney U p-value.
///
/// Exact: 2 * min(P(U <= u), P(U >= u)) under the permutation null, capped
/// at 1; refuses ties. Approx: normal approximation with tie and continuity
/// corrections. Auto: exact when n_x + n_y <= 24 and there are no ties.
inline double mann_whitney_u(std::span<const double> x, std::span<const double> y, MwuMode mode = MwuMode::Auto) {
  if (x.empty() || y.empty()) throw Error(Errc::TooFewSamples, "Mann-Whitney needs two non-empty samples");
  for (auto s : {x, y})
    for (double v : s)
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, "Mann-Whitney input is not finite");
  const std::size_t nx = x.size(), ny = y.size(), total = nx + ny;
  const bool ties = detail::has_ties(x, y);
  if (mode == MwuMode::Auto) mode = (total <= 24 && !ties) ? MwuMode::Exact : MwuMode::Approx;

  const std::uint64_t twice = detail::twice_u(x, y);
  if (mode == MwuMode::Exact) {
    if (ties) throw Error(Errc::TiesInExactMode, "exact Mann-Whitney requires tie-free samples");
    if (total > kMaxExactMwu) throw Error(Errc::InvalidArgument, "exact Mann-Whitney limited to n_x + n_y <= 66");
    // Distribution is symmetric in (m, n); use the smaller side as m for speed.
    const auto counts = mann_whitney_null_counts(std::min(nx, ny), std::max(nx, ny));
    const std::uint64_t u = twice / 2;
    std::uint64_t le = 0, ge = 0, all = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      all += counts[k];
      if (k <= u) le += counts[k];
      if (k >= u) ge += counts[k];
    }
    const double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(all);
    return detail::clamp_p(p);
  }

  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const auto n1 = static_cast<double>(nx), n2 = static_cast<double>(ny), nn = static_cast<double>(total);
  const double mu = 0.5 * n1 * n2;
  const double var = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  const double u1 = 0.5 * static_cast<double>(twice);
  const double u = std::max(u1, n1 * n2 - u1);
  if (!(var > 0.0)) return 1.0;
  const double z = (u - mu - 0.5) / std::sqrt(var);
  return detail::clamp_p(2.0 * detail::normal_upper_tail(z));
}

// --- Student's t ---------------------------------------------------------------

enum class TTestVariant { Pooled, Welch };

/// Two-sided two-sample t-test (pooled variance by default).
inline double students_t(std::span<const double> x, std::span<const double> y,
                         TTestVariant variant = TTestVariant::Pooled) {
  if (x.size() < 2 || y.size() < 2) throw Error(Errc::TooFewSamples, "t-test needs n >= 2 per sample");
  const auto nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const double mx = detail::mean_of(x), my = detail::mean_of(y);
  double ssx = 0.0, ssy = 0.0;
  for (double v : x) ssx += (v - mx) * (v - mx);
  for (double v : y) ssy += (v - my) * (v - my);
  double se = 0.0, df = 0.0;
  if (variant == TTestVariant::Pooled) {
    const double sp2 = (ssx + ssy) / (nx + ny - 2.0);
    if (!(sp2 > 0.0)) throw Error(Errc::ZeroVariance, "pooled variance is zero");
    se = std::sqrt(sp2 * (1.0 / nx + 1.0 / ny));
    df = nx + ny - 2.0;
  } else {
    const double vx = ssx / (nx - 1.0) / nx, vy = ssy / (ny - 1.0) / ny;
    if (!(vx + vy > 0.0)) throw Error(Errc::ZeroVariance, "both samples have zero variance");
    se = std::sqrt(vx + vy);
    df = (vx + vy) * (vx + vy) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
  }
  const double t = (mx - my) / se;
  const boost::math::students_t_distribution<double> dist(df);
  return detail::clamp_p(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

// --- Significance matrices ---------------------------------------------------------

/// One detector's values for one metric across evaluation contexts.
struct ResultVector {
  std::string detector;
  std::string metric;
  std::vector<double> values;
};

enum class TestUsed { None, MannWhitney, TTest };

constexpr std::string_view test_used_name(TestUsed t) noexcept {
  switch (t) {
    case TestUsed::None: return "-";
    case TestUsed::MannWhitney: return "mann-whitney";
    case TestUsed::TTest: return "t-test";
  }
  return "?";
}

struct SignificanceMatrix {
  std::vector<std::string> detectors;
  std::vector<std::vector<double>> p_values;     // symmetric, unit diagonal
  std::vector<std::vector<TestUsed>> test_used;  // None on the diagonal
  std::vector<std::optional<double>> normality_p;  // absent when the test is undefined

  std::size_t size() const noexcept { return detectors.size(); }
};

struct PairwiseOptions {
  double alpha_normality = 0.05;
  TTestVariant t_variant = TTestVariant::Pooled;
};

/// All unordered detector pairs: Student's t when both samples pass
/// Shapiro-Wilk at alpha_normality, Mann-Whitney (auto) otherwise.
inline SignificanceMatrix pairwise_matrix(const std::vector<ResultVector>& results, PairwiseOptions opt = {}) {
  const std::size_t d = results.size();
  if (d < 2) throw Error(Errc::InvalidArgument, "pairwise_matrix needs at least two detectors");
  for (const auto& r : results)
    if (r.values.size() != results.front().values.size())
      throw Error(Errc::DimensionMismatch, "result vectors are not aligned (" + r.detector + ")");
  SignificanceMatrix m;
  m.p_values.assign(d, std::vector<double>(d, 1.0));
  m.test_used.assign(d, std::vector<TestUsed>(d, TestUsed::None));
  for (const auto& r : results) {
    m.detectors.push_back(r.detector);
    try {
      m.normality_p.emplace_back(shapiro_wilk(r.values));
    } catch (const Error& e) {
      if (e.code() != Errc::ConstantInput && e.code() != Errc::TooFewSamples) throw;
      m.normality_p.emplace_back(std::nullopt);
    }
  }
  auto normal = [&](std::size_t i) { return m.normality_p[i] && *m.normality_p[i] >= opt.alpha_normality; };
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      double p = 1.0;
      TestUsed used = TestUsed::MannWhitney;
      if (normal(a) && normal(b)) {
        p = students_t(results[a].values, results[b].values, opt.t_variant);
        used = TestUsed::TTest;
      } else {
        p = mann_whitney_u(results[a].values, results[b].values, MwuMode::Auto);
      }
      m.p_values[a][b] = m.p_values[b][a] = p;
      m.test_used[a][b] = m.test_used[b][a] = used;
    }
  }
  return m;
}

// --- Fidelity: hit and error rates ----------------------------------------------------

struct FidelityReport {
  std::string metric;
  double alpha = 0.1;
  std::size_t runs = 0;
  std::vector<std::string> detectors;
  /// Number of CV runs with p < alpha; positive where the benchmark is
  /// significant, negative where it is not. Zero on the diagonal.
  std::vector<std::vector<int>> counts;
  std::size_t benchmark_pairs = 0;     // |B|
  std::size_t nonbenchmark_pairs = 0;  // |NB|
  std::optional<double> hit_rate;      // undefined when |B| = 0
  std::optional<double> error_rate;    // undefined when |NB| = 0
};

/// Rates from per-pair counts of significant CV runs (`significant_runs[a][b]`
/// in [0, runs]).
inline FidelityReport hit_error_rates_from_counts(const SignificanceMatrix& benchmark,
                                                  const std::vector<std::vector<int>>& significant_runs,
                                                  std::size_t runs, double alpha, std::string metric = {}) {
  const std::size_t d = benchmark.size();
  if (significant_runs.size() != d) throw Error(Errc::DetectorMismatch, "count matrix size differs from benchmark");
  FidelityReport r{std::move(metric), alpha, runs, benchmark.detectors, std::vector<std::vector<int>>(d, std::vector<int>(d, 0)),
                   0, 0, std::nullopt, std::nullopt};
  long hit_sum = 0, err_sum = 0;
  for (std::size_t a = 0; a < d; ++a) {
    if (significant_runs[a].size() != d) throw Error(Errc::DetectorMismatch, "count matrix is not square");
    for (std::size_t b = a + 1; b < d; ++b) {
      const int c = significant_runs[a][b];
      if (c < 0 || static_cast<std::size_t>(c) > runs)
        throw Error(Errc::InvalidArgument, "count out of [0, runs] for " + benchmark.detectors[a] + "/" + benchmark.detectors[b]);
      if (benchmark.p_values[a][b] < alpha) {
        ++r.benchmark_pairs;
        hit_sum += c;
        r.counts[a][b] = r.counts[b][a] = c;
      } else {
        ++r.nonbenchmark_pairs;
        err_sum += c;
        r.counts[a][b] = r.counts[b][a] = -c;
      }
    }
  }
  if (r.benchmark_pairs > 0) r.hit_rate = static_cast<double>(hit_sum) / static_cast<double>(r.benchmark_pairs);
  if (r.nonbenchmark_pairs > 0) r.error_rate = static_cast<double>(err_sum) / static_cast<double>(r.nonbenchmark_pairs);
  return r;
}

/// Hit rate = mean over benchmark-significant pairs of the number of CV runs
/// also significant; error rate = same mean over the remaining pairs. Both on
/// the [0, R] scale.
inline FidelityReport hit_error_rates(const SignificanceMatrix& benchmark, const std::vector<SignificanceMatrix>& cv_runs,
                                      double alpha, std::string metric = {}) {
  if (cv_runs.empty()) throw Error(Errc::InvalidArgument, "need at least one CV run");
  const std::size_t d = benchmark.size();
  std::vector<std::vector<int>> sig(d, std::vector<int>(d, 0));
  for (const auto& run : cv_runs) {
    if (run.detectors != benchmark.detectors) throw Error(Errc::DetectorMismatch, "CV run detectors differ from benchmark");
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        if (a != b && run.p_values[a][b] < alpha) ++sig[a][b];
  }
  return hit_error_rates_from_counts(benchmark, sig, cv_runs.size(), alpha, std::move(metric));
}

/// Recomputes both rates from the emitted signed counts and pair totals.
inline std::pair<std::optional<double>, std::optional<double>> rates_from_signed_counts(const FidelityReport& r) {
  long hit = 0, err = 0;
  for (std::size_t a = 0; a < r.counts.size(); ++a)
    for (std::size_t b = a + 1; b < r.counts.size(); ++b)
      (r.counts[a][b] > 0 ? hit : err) += std::abs(r.counts[a][b]);
  std::optional<double> h, e;
  if (r.benchmark_pairs > 0) h = static_cast<double>(hit) / static_cast<double>(r.benchmark_pairs);
  if (r.nonbenchmark_pairs > 0) e = static_cast<double>(err) / static_cast<double>(r.nonbenchmark_pairs);
  return {h, e};
}

// --- Fidelity: method-wise comparison ----------------------------------------------------

struct MethodwiseFlag {
  std::size_t run = 0;  // zero-based
  std::string detector;
  double p_value = 1.0;
};

struct MethodwiseTable {
  std::string metric;
  std::vector<std::string> detectors;
  std::vector<double> alphas;
  std::vector<std::vector<double>> p_values;           // [run][detector]
  std::vector<std::vector<MethodwiseFlag>> flagged;    // [alpha index]
};

/// For each detector and CV run, Mann-Whitney between that run's
/// per-context values and the benchmark's; cells with p <= alpha are flagged.
inline MethodwiseTable methodwise_comparison(const std::vector<ResultVector>& benchmark,
                                             const std::vector<std::vector<ResultVector>>& cv_runs,
                                             const std::vector<double>& alphas, std::string metric = {}) {
  MethodwiseTable t;
  t.metric = std::move(metric);
  t.alphas = alphas;
  for (const auto& r : benchmark) t.detectors.push_back(r.detector);
  t.flagged.resize(alphas.size());
  for (std::size_t run = 0; run < cv_runs.size(); ++run) {
    if (cv_runs[run].size() != benchmark.size()) throw Error(Errc::DetectorMismatch, "CV run has a different detector count");
    std::vector<double> row;
    for (std::size_t d = 0; d < benchmark.size(); ++d) {
      if (cv_runs[run][d].detector != benchmark[d].detector)
        throw Error(Errc::DetectorMismatch, "detector order differs: " + cv_runs[run][d].detector);
      const double p = mann_whitney_u(cv_runs[run][d].values, benchmark[d].values, MwuMode::Auto);
      row.push_back(p);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        if (p <= alphas[a]) t.flagged[a].push_back({run, benchmark[d].detector, p});
    }
    t.p_values.push_back(std::move(row));
  }
  return t;
}

/// "CV 3 (mds), CV 6 (mds)" with one-based run ids, or "-".
inline std::string format_methodwise_cell(const std::vector<MethodwiseFlag>& flags) {
  if (flags.empty()) return "-";
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ", ";
    out += fmt::format("CV {} ({})", f.run + 1, f.detector);
  }
  return out;
}

// --- Formatting -----------------------------------------------------------------------

/// * p < 0.1, ** p < 0.05, *** p < 0.01
inline std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

inline std::string significance_matrix_csv(const SignificanceMatrix& m) {
  std::string out = "detector";
  for (const auto& d : m.detectors) out += "," + d;
  out += "\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    out += m.detectors[a];
    for (std::size_t b = 0; b < m.size(); ++b) out += fmt::format(",{:.10g}", m.p_values[a][b]);
    out += "\n";
  }
  return out;
}

inline std::string significance_tests_csv(const SignificanceMatrix& m) {
  std::string out = "detector";
  for (const auto& d : m.detectors) out += "," + d;
  out += "\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    out += m.detectors[a];
    for (std::size_t b = 0; b < m.size(); ++b) out += "," + std::string(test_used_name(m.test_used[a][b]));
    out += "\n";
  }
  return out;
}

inline std::string significance_matrix_text(const SignificanceMatrix& m) {
  std::size_t w = 8;
  for (const auto& d : m.detectors) w = std::max(w, d.size());
  const std::size_t cell = std::max<std::size_t>(w, 10) + 1;
  std::string out = fmt::format("{:<{}}", "", w + 1);
  for (const auto& d : m.detectors) out += fmt::format("{:>{}}", d, cell);
  out += "\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    out += fmt::format("{:<{}}", m.detectors[a], w + 1);
    for (std::size_t b = 0; b < m.size(); ++b) {
      const std::string v = a == b ? "1" : fmt::format("{:.4f}{}", m.p_values[a][b], significance_stars(m.p_values[a][b]));
      out += fmt::format("{:>{}}", v, cell);
    }
    out += "\n";
  }
  out += "Significance: * p < 0.1, ** p < 0.05, *** p < 0.01\n";
  return out;
}

inline std::string format_rate(const std::optional<double>& r) { return r ? fmt::format("{:.4f}", *r) : "null"; }

inline std::string fidelity_counts_csv(const FidelityReport& r) {
  std::string out = "detector";
  for (const auto& d : r.detectors) out += "," + d;
  out += "\n";
  for (std::size_t a = 0; a < r.detectors.size(); ++a) {
    out += r.detectors[a];
    for (std::size_t b = 0; b < r.detectors.size(); ++b) out += a == b ? ",-" : fmt::format(",{}", r.counts[a][b]);
    out += "\n";
  }
  return out;
}

/// Reads a square detector matrix CSV (header row of names, first column names).
inline std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> parse_square_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw Error(Errc::ManifestParse, "empty matrix CSV");
  std::vector<std::string> names(rows[0].begin() + 1, rows[0].end());
  std::vector<std::vector<std::string>> body;
  if (rows.size() != names.size() + 1) throw Error(Errc::ManifestParse, "matrix CSV is not square");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != names.size() + 1 || rows[i][0] != names[i - 1])
      throw Error(Errc::ManifestParse, "matrix CSV row " + std::to_string(i) + " malformed");
    body.emplace_back(rows[i].begin() + 1, rows[i].end());
  }
  return {names, body};
}

/// Benchmark p-value matrix from CSV; "-" or empty diagonal cells read as 1.
inline SignificanceMatrix significance_matrix_from_csv(const std::string& text) {
  auto [names, body] = parse_square_csv(text);
  SignificanceMatrix m;
  m.detectors = names;
  const std::size_t d = names.size();
  m.p_values.assign(d, std::vector<double>(d, 1.0));
  m.test_used.assign(d, std::vector<TestUsed>(d, TestUsed::None));
  m.normality_p.assign(d, std::nullopt);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      if (a == b) continue;
      m.p_values[a][b] = std::stod(body[a][b]);
      m.test_used[a][b] = TestUsed::MannWhitney;
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b)
      if (m.p_values[a][b] != m.p_values[b][a])
        throw Error(Errc::ManifestParse, "benchmark matrix not symmetric at " + names[a] + "/" + names[b]);
  return m;
}

/// Count matrix from CSV; signs are ignored (the benchmark decides them).
inline std::vector<std::vector<int>> count_matrix_from_csv(const std::string& text, const std::vector<std::string>& expected) {
  auto [names, body] = parse_square_csv(text);
  if (names != expected) throw Error(Errc::DetectorMismatch, "count matrix detectors differ from benchmark");
  const std::size_t d = names.size();
  std::vector<std::vector<int>> c(d, std::vector<int>(d, 0));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      if (a != b && body[a][b] != "-" && !body[a][b].empty()) c[a][b] = std::abs(std::stoi(body[a][b]));
  return c;
}

}  // namespace dcvrood

#endif  // DCVROOD_STATS_HPP_
