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

#include <fstream>

#include "catch2/catch_amalgamated.hpp"
#include "metric_oracles.hpp"
#include "test_support.hpp"

using namespace dcvrood;
using namespace dcvrood::testing;
using Catch::Matchers::WithinAbs;

namespace {

LabeledScores ls(std::vector<double> id, std::vector<double> ood) { return {std::move(id), std::move(ood)}; }

}  // namespace

TEST_CASE("tpr_at_fpr") {
  CHECK(tpr_at_fpr(ls({0, 1, 2, 3}, {4, 5, 6}), 0.05) == 1.0);
  CHECK(tpr_at_fpr(ls({0, 1, 2, 3}, {4, 5, 6}), 0.5) == 1.0);
  CHECK(tpr_at_fpr(ls({2, 2, 2}, {2, 2}), 0.05) == 0.0);
  SECTION("20 spread ID scores with OOD interleaved near the top") {
    std::vector<double> id;
    for (int i = 1; i <= 20; ++i) id.push_back(i);
    const LabeledScores x = ls(id, {18.5, 19.0, 19.5, 20.0, 20.5, 3.0});
    // One ID exceedance out of 20 is exactly the 5% cap: t = 19.5.
    CHECK(tpr_at_fpr(x) == sweep_tpr_at_fpr(x, 0.05));
    CHECK_THAT(tpr_at_fpr(x), WithinAbs(3.0 / 6.0, 0.0));
  }
  SECTION("agrees with the sweep on random inputs") {
    for (std::uint64_t s = 0; s < 300; ++s) {
      const auto x = random_labeled_scores(s, 60);
      for (double cap : {0.05, 0.1, 0.37})
        CHECK(tpr_at_fpr(x, cap) == sweep_tpr_at_fpr(x, cap));
    }
  }
  CHECK_THROWS_AS(tpr_at_fpr(ls({}, {1})), Error);
  CHECK_THROWS_AS(tpr_at_fpr(ls({1}, {1}), 1.0), Error);
}

TEST_CASE("auroc") {
  CHECK(auroc(ls({0, 0, 0}, {1, 1, 1})) == 1.0);
  CHECK(auroc(ls({0.2, 0.5, 0.9}, {0.9, 0.2, 0.5})) == 0.5);
  CHECK(auroc(ls({0.1, 0.4}, {0.3, 0.9})) == 0.75);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto x = random_labeled_scores(1000 + s, 80);
    CHECK_THAT(auroc(x), WithinAbs(brute_auroc(x), 1e-12));
  }
}

TEST_CASE("aupr") {
  CHECK(aupr(ls({0, 1}, {2, 3})) == 1.0);
  SECTION("single OOD ranked first among nine ID") {
    CHECK(aupr(ls({1, 2, 3, 4, 5, 6, 7, 8, 9}, {10})) == 1.0);
  }
  SECTION("single OOD ranked last") {
    CHECK_THAT(aupr(ls({1, 2, 3}, {0})), WithinAbs(0.25, 1e-15));
  }
  SECTION("ties are grouped") {
    // One threshold holds everything: precision = 1/2.
    CHECK_THAT(aupr(ls({1}, {1})), WithinAbs(0.5, 1e-15));
  }
  SECTION("random scorer on balanced classes is near the prevalence") {
    SplitMix64 rng(77);
    LabeledScores x;
    for (int i = 0; i < 2000; ++i) x.id_scores.push_back(rng.uniform01());
    for (int i = 0; i < 2000; ++i) x.ood_scores.push_back(rng.uniform01());
    CHECK_THAT(aupr(x), WithinAbs(0.5, 0.05));
  }
}

TEST_CASE("ID percentile threshold") {
  std::vector<double> id;
  for (int i = 10; i >= 1; --i) id.push_back(i);
  CHECK(threshold_at_id_percentile(ls(id, {0}), 0.9) == 9.0);
  CHECK(threshold_at_id_percentile(ls({4, 4, 4}, {0}), 0.9) == 4.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = random_labeled_scores(s, 40);
    CHECK(threshold_at_id_percentile(x, 0.5) <= threshold_at_id_percentile(x, 0.9));
  }
}

TEST_CASE("confusion at threshold") {
  const auto x = ls({1, 3}, {2, 4});
  CHECK(confusion_at_threshold(x, -1e300) == Confusion{2, 2, 0, 0});
  CHECK(confusion_at_threshold(x, 10) == Confusion{0, 0, 2, 2});
  CHECK(confusion_at_threshold(x, 2) == Confusion{1, 1, 1, 1});
  CHECK(f1_from({1, 1, 1, 1}) == 0.5);
  CHECK(accuracy_from({1, 1, 1, 1}) == 0.5);
}

TEST_CASE("evaluate_scores") {
  SECTION("perfect separation") {
    std::vector<double> id, ood;
    for (int i = 0; i < 20; ++i) id.push_back(i);
    for (int i = 0; i < 7; ++i) ood.push_back(100 + i);
    const auto r = evaluate_scores(ls(id, ood));
    CHECK(r.tpr5 == 1.0);
    CHECK(r.auroc == 1.0);
    CHECK(r.aupr == 1.0);
    // The nearest-rank threshold is the 18th ID score; the two above it are
    // false positives.
    CHECK(r.acc90 >= (0.9 * 20 + 7) / 27.0 - 1e-15);
    CHECK(r.confusion_acc90 == Confusion{7, 2, 18, 0});
    CHECK_THAT(r.f1, WithinAbs(14.0 / 16.0, 1e-15));
  }
  SECTION("constant detector") {
    const auto r = evaluate_scores(ls({1, 1, 1}, {1, 1}));
    CHECK(r.auroc == 0.5);
    CHECK(r.tpr5 == 0.0);
  }
  SECTION("all values lie in [0,1]") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto r = evaluate_scores(random_labeled_scores(s, 30));
      for (Metric m : kAllMetrics) {
        CHECK(metric_value(r, m) >= 0.0);
        CHECK(metric_value(r, m) <= 1.0);
      }
    }
  }
}

TEST_CASE("golden score table") {
  std::ifstream in(std::string(DCVROOD_FIXTURES) + "/metrics_golden_scores.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  EvaluationRound round;
  std::vector<SampleId> ids;
  std::vector<double> scores;
  while (std::getline(in, line)) {
    const auto c = split_csv_line(line);
    (c[1] == "id" ? round.test_id : round.test_ood).push_back(c[0]);
    ids.push_back(c[0]);
    scores.push_back(std::stod(c[2]));
  }
  const auto expected =
      nlohmann::json::parse(read_text_file(std::string(DCVROOD_FIXTURES) + "/metrics_golden_expected.json"));
  const MetricReport r = evaluate_round(make_score_table("golden", 0, ids, scores), round);
  CHECK_THAT(r.tpr5, WithinAbs(expected["tpr5"].get<double>(), 1e-12));
  CHECK_THAT(r.auroc, WithinAbs(expected["auroc"].get<double>(), 1e-12));
  CHECK_THAT(r.aupr, WithinAbs(expected["aupr"].get<double>(), 1e-12));
  CHECK_THAT(r.f1, WithinAbs(expected["f1"].get<double>(), 1e-12));
  CHECK_THAT(r.acc90, WithinAbs(expected["acc90"].get<double>(), 1e-12));
  CHECK(r.threshold_acc90 == expected["threshold_acc90"].get<double>());
  CHECK(r.n_id == expected["n_id"].get<std::size_t>());
  CHECK(r.n_ood == expected["n_ood"].get<std::size_t>());
  CHECK(r.confusion_acc90.tp == expected["confusion"]["tp"].get<std::size_t>());
  CHECK(r.confusion_acc90.fp == expected["confusion"]["fp"].get<std::size_t>());
}

TEST_CASE("evaluate_round checks coverage") {
  EvaluationRound round;
  round.test_id = {"a"};
  round.test_ood = {"b"};
  CHECK_THROWS_AS(evaluate_round(make_score_table("d", 0, {"a"}, {1.0}), round), Error);
  CHECK_THROWS_AS(evaluate_round(make_score_table("d", 0, {"a", "b", "c"}, {1, 2, 3}), round), Error);
  round.test_ood.clear();
  try {
    evaluate_round(make_score_table("d", 0, {"a"}, {1.0}), round);
    FAIL("round without OOD accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyClass);
  }
}

TEST_CASE("metric names") {
  for (Metric m : kAllMetrics) CHECK(parse_metric(metric_name(m)) == m);
  CHECK_THROWS_AS(parse_metric("nope"), Error);
}
