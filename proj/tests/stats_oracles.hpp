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

// Enumeration oracle for the exact two-sample rank test.
#ifndef DCVROOD_TESTS_STATS_ORACLES_HPP_
#define DCVROOD_TESTS_STATS_ORACLES_HPP_

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

namespace dcvrood::testing {

/// Two-sided exact p-value by listing every way to label n_x of the pooled
/// values as x: 2 * min(#{U <= u}, #{U >= u}) / C(N, n_x), capped at 1.
/// Inputs must be tie-free and N <= 20.
inline double enumerate_mwu_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  const unsigned n = static_cast<unsigned>(pooled.size());
  auto u_of = [&](std::uint32_t mask) {
    long u = 0;
    for (unsigned i = 0; i < n; ++i)
      if (mask >> i & 1u)
        for (unsigned j = 0; j < n; ++j)
          if (!(mask >> j & 1u) && pooled[i] > pooled[j]) ++u;
    return u;
  };
  const long observed = u_of((1u << x.size()) - 1u);
  long le = 0, ge = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != x.size()) continue;
    const long u = u_of(mask);
    ++total;
    le += u <= observed;
    ge += u >= observed;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

}  // namespace dcvrood::testing

#endif  // DCVROOD_TESTS_STATS_ORACLES_HPP_
