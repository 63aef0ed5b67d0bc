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

#ifndef DCVROOD_HARNESS_HPP_
#define DCVROOD_HARNESS_HPP_

// Experiment orchestration: the repeated-random-split benchmark regime, the
// dual cross-validation regime, their comparison, and the run ledger.
//
// Output layout under a regime directory:
//   ledger.jsonl, warnings.log, results.json
//   truth:  rep_XXX.csv, running_means.csv, convergence.csv
//   dcv:    exp_XX/metrics.csv, exp_XX/folds_<pair>_{id,ood}.json

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "dcvrood/detectors.hpp"
#include "dcvrood/error.hpp"
#include "dcvrood/io.hpp"
#include "dcvrood/metrics.hpp"
#include "dcvrood/random.hpp"
#include "dcvrood/splitter.hpp"
#include "dcvrood/stats.hpp"
#include "dcvrood/synth.hpp"
#include "dcvrood/taxonomy.hpp"

namespace dcvrood {

using nlohmann::json;

// --- Configuration -----------------------------------------------------------------

struct DetectorSpec {
  std::string name;
  std::string type;  // ebo | gen | knn | mds | external
  double noise = 0.0;  // sd of a fixed per-sample Gaussian perturbation of the payload
  double gen_gamma = 0.1;
  std::optional<std::size_t> gen_top_m;
  std::optional<std::size_t> knn_k;
  /// External scores; placeholders {regime} {run} {pair} {round}.
  std::string path_pattern;
};

struct DatasetPair {
  std::string name;
  std::string id_name, ood_name;
  bool hierarchical = false;
  // flat
  fs::path id_manifest, ood_manifest;
  std::optional<fs::path> id_features, id_logits, ood_features, ood_logits;
  // hierarchical
  fs::path manifest;
  std::optional<fs::path> features, logits;
  double p = 0.4;
};

enum class ContextGranularity { PairMean, Fold };

struct ExperimentConfig {
  std::vector<DatasetPair> dataset_pairs;
  std::vector<DetectorSpec> detectors;
  std::size_t k = 5;
  std::size_t e_runs = 10;
  std::size_t r_truth = 100;
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.1, 0.05, 0.01};
  double alpha_normality = 0.05;
  fs::path output_dir = "out";
  ContextGranularity context = ContextGranularity::PairMean;
  std::size_t convergence_window = 10;
  double convergence_threshold = 0.005;
  std::optional<double> truth_id_test_fraction;   // default 1/k
  std::optional<double> truth_ood_test_fraction;  // default 1/k of OOD classes
  bool random_id_folds = false;
  TTestVariant t_variant = TTestVariant::Pooled;

  double id_test_fraction() const { return truth_id_test_fraction.value_or(1.0 / static_cast<double>(k)); }
  double ood_test_fraction() const { return truth_ood_test_fraction.value_or(1.0 / static_cast<double>(k)); }
};

inline std::string context_name(ContextGranularity c) { return c == ContextGranularity::PairMean ? "pair-mean" : "fold"; }

namespace detail {

inline std::optional<fs::path> opt_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  fs::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base / p;
}

inline fs::path req_path(const json& j, const char* key, const fs::path& base) {
  auto p = opt_path(j, key, base);
  if (!p) throw Error(Errc::ConfigError, std::string("missing '") + key + "'");
  return *p;
}

inline json path_json(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace detail

/// Parses a config document; relative paths resolve against `base_dir`.
inline ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  try {
    ExperimentConfig c;
    for (const auto& pj : j.at("dataset_pairs")) {
      DatasetPair p;
      p.name = pj.at("name").get<std::string>();
      p.hierarchical = pj.value("hierarchical", false);
      if (p.hierarchical) {
        p.manifest = detail::req_path(pj, "manifest", base_dir);
        p.features = detail::opt_path(pj, "features", base_dir);
        p.logits = detail::opt_path(pj, "logits", base_dir);
        p.p = pj.value("p", 0.4);
        p.id_name = pj.value("id_name", p.name + "-ID");
        p.ood_name = pj.value("ood_name", p.name + "-OOD");
      } else {
        p.id_manifest = detail::req_path(pj, "id_manifest", base_dir);
        p.ood_manifest = detail::req_path(pj, "ood_manifest", base_dir);
        p.id_features = detail::opt_path(pj, "id_features", base_dir);
        p.id_logits = detail::opt_path(pj, "id_logits", base_dir);
        p.ood_features = detail::opt_path(pj, "ood_features", base_dir);
        p.ood_logits = detail::opt_path(pj, "ood_logits", base_dir);
        p.id_name = pj.value("id_name", p.name + "-ID");
        p.ood_name = pj.value("ood_name", p.name + "-OOD");
      }
      c.dataset_pairs.push_back(std::move(p));
    }
    for (const auto& dj : j.at("detectors")) {
      DetectorSpec d;
      d.type = dj.at("type").get<std::string>();
      d.name = dj.value("name", d.type);
      d.noise = dj.value("noise", 0.0);
      d.gen_gamma = dj.value("gamma", 0.1);
      if (dj.contains("top_m")) d.gen_top_m = dj.at("top_m").get<std::size_t>();
      if (dj.contains("k_neighbors")) d.knn_k = dj.at("k_neighbors").get<std::size_t>();
      if (dj.contains("path_pattern")) {
        fs::path pp = dj.at("path_pattern").get<std::string>();
        d.path_pattern = (pp.is_absolute() ? pp : base_dir / pp).string();
      }
      c.detectors.push_back(std::move(d));
    }
    c.k = j.value("k", c.k);
    c.e_runs = j.value("e_runs", c.e_runs);
    c.r_truth = j.value("r_truth", c.r_truth);
    c.seed = j.value("seed", c.seed);
    c.alphas = j.value("alphas", c.alphas);
    c.alpha_normality = j.value("alpha_normality", c.alpha_normality);
    if (j.contains("output_dir")) {
      fs::path o = j.at("output_dir").get<std::string>();
      c.output_dir = o.is_absolute() ? o : base_dir / o;
    }
    const std::string ctx = j.value("context", std::string("pair-mean"));
    if (ctx == "pair-mean") c.context = ContextGranularity::PairMean;
    else if (ctx == "fold") c.context = ContextGranularity::Fold;
    else throw Error(Errc::ConfigError, "context must be pair-mean or fold");
    c.convergence_window = j.value("convergence_window", c.convergence_window);
    c.convergence_threshold = j.value("convergence_threshold", c.convergence_threshold);
    if (j.contains("truth_id_test_fraction")) c.truth_id_test_fraction = j.at("truth_id_test_fraction").get<double>();
    if (j.contains("truth_ood_test_fraction")) c.truth_ood_test_fraction = j.at("truth_ood_test_fraction").get<double>();
    c.random_id_folds = j.value("random_id_folds", false);
    c.t_variant = j.value("welch", false) ? TTestVariant::Welch : TTestVariant::Pooled;
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, e.what());
  }
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  auto pairs = json::array();
  for (const auto& p : c.dataset_pairs) {
    json pj{{"name", p.name}, {"id_name", p.id_name}, {"ood_name", p.ood_name}, {"hierarchical", p.hierarchical}};
    if (p.hierarchical) {
      pj["manifest"] = p.manifest.string();
      pj["features"] = detail::path_json(p.features);
      pj["logits"] = detail::path_json(p.logits);
      pj["p"] = p.p;
    } else {
      pj["id_manifest"] = p.id_manifest.string();
      pj["ood_manifest"] = p.ood_manifest.string();
      pj["id_features"] = detail::path_json(p.id_features);
      pj["id_logits"] = detail::path_json(p.id_logits);
      pj["ood_features"] = detail::path_json(p.ood_features);
      pj["ood_logits"] = detail::path_json(p.ood_logits);
    }
    pairs.push_back(std::move(pj));
  }
  j["dataset_pairs"] = std::move(pairs);
  auto dets = json::array();
  for (const auto& d : c.detectors) {
    json dj{{"name", d.name}, {"type", d.type}, {"noise", d.noise}};
    if (d.type == "gen") dj["gamma"] = d.gen_gamma;
    if (d.gen_top_m) dj["top_m"] = *d.gen_top_m;
    if (d.knn_k) dj["k_neighbors"] = *d.knn_k;
    if (!d.path_pattern.empty()) dj["path_pattern"] = d.path_pattern;
    dets.push_back(std::move(dj));
  }
  j["detectors"] = std::move(dets);
  j["k"] = c.k;
  j["e_runs"] = c.e_runs;
  j["r_truth"] = c.r_truth;
  j["seed"] = c.seed;
  j["alphas"] = c.alphas;
  j["alpha_normality"] = c.alpha_normality;
  j["output_dir"] = c.output_dir.string();
  j["context"] = context_name(c.context);
  j["convergence_window"] = c.convergence_window;
  j["convergence_threshold"] = c.convergence_threshold;
  if (c.truth_id_test_fraction) j["truth_id_test_fraction"] = *c.truth_id_test_fraction;
  if (c.truth_ood_test_fraction) j["truth_ood_test_fraction"] = *c.truth_ood_test_fraction;
  j["random_id_folds"] = c.random_id_folds;
  j["welch"] = c.t_variant == TTestVariant::Welch;
  return j;
}

/// Applies `key=value` overrides to top-level config keys. Values parse as
/// JSON when possible, otherwise as strings.
inline void apply_overrides(json& j, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::ConfigError, "--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    j[key] = std::move(v);
  }
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.k < 2) throw Error(Errc::ConfigError, "k must be >= 2");
  if (c.e_runs < 1) throw Error(Errc::ConfigError, "e_runs must be >= 1");
  if (c.r_truth < 1) throw Error(Errc::ConfigError, "r_truth must be >= 1");
  if (c.dataset_pairs.empty()) throw Error(Errc::ConfigError, "no dataset pairs");
  if (c.detectors.empty()) throw Error(Errc::ConfigError, "no detectors");
  std::set<std::string> names;
  for (const auto& d : c.detectors) {
    if (!names.insert(d.name).second) throw Error(Errc::ConfigError, "duplicate detector name '" + d.name + "'");
    static const std::set<std::string> types{"ebo", "gen", "knn", "mds", "external"};
    if (!types.contains(d.type)) throw Error(Errc::ConfigError, "unknown detector type '" + d.type + "'");
    if (d.type == "external" && d.path_pattern.empty())
      throw Error(Errc::ConfigError, "external detector '" + d.name + "' needs path_pattern");
    if (d.noise < 0) throw Error(Errc::ConfigError, "noise must be >= 0");
  }
  names.clear();
  auto must_exist = [](const std::optional<fs::path>& p) {
    if (p && !fs::exists(*p)) throw Error(Errc::ConfigError, "missing file " + p->string());
  };
  for (const auto& p : c.dataset_pairs) {
    if (!names.insert(p.name).second) throw Error(Errc::ConfigError, "duplicate pair name '" + p.name + "'");
    if (p.hierarchical) {
      must_exist(p.manifest);
      must_exist(p.features);
      must_exist(p.logits);
    } else {
      for (const auto& f : {std::optional(p.id_manifest), std::optional(p.ood_manifest), p.id_features, p.id_logits,
                            p.ood_features, p.ood_logits})
        must_exist(f);
    }
  }
  for (double a : c.alphas)
    if (!(a > 0 && a < 1)) throw Error(Errc::ConfigError, "alphas must lie in (0,1)");
}

inline ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ConfigError, path.string() + " is not valid JSON");
  apply_overrides(j, overrides);
  ExperimentConfig c = config_from_json(j, path.parent_path());
  validate_config(c);
  return c;
}

// --- Loaded data ------------------------------------------------------------------

/// Per-detector payloads for one side (ID or OOD) of a pair, perturbed once.
struct DetectorPayload {
  std::shared_ptr<const Matrix> features;
  std::shared_ptr<const Matrix> logits;
};

struct PairData {
  std::string name, id_name, ood_name;
  bool hierarchical = false;
  std::shared_ptr<const SampleSet> id, ood;
  std::vector<DetectorPayload> id_payload, ood_payload;  // one per detector
  std::vector<std::string> warnings;
};

namespace detail {

/// Adds a fixed N(0, noise^2) perturbation per (sample, detector) cell.
inline std::shared_ptr<const Matrix> perturbed(const std::optional<Matrix>& m, const SampleSet& s, double noise,
                                               const std::string& detector, std::string_view what) {
  if (!m) return nullptr;
  if (noise == 0.0) return std::make_shared<const Matrix>(*m);
  Matrix out = *m;
  for (std::size_t i = 0; i < s.size(); ++i) {
    SplitMix64 rng(derive_seed(fnv1a64(s.records()[i].id), std::string(what) + "/" + detector, 0));
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(static_cast<Eigen::Index>(i), c) += noise * rng.normal();
  }
  return std::make_shared<const Matrix>(std::move(out));
}

/// Keeps only logit columns of `keep` classes (columns follow the canonical
/// order of all classification-level classes).
inline SampleSet slice_logit_columns(const SampleSet& s, const std::vector<ClassId>& keep) {
  if (!s.logits()) return s;
  const auto all = s.taxonomy().classes_at(s.taxonomy().classification_level());
  if (static_cast<std::size_t>(s.logits()->cols()) != all.size()) return s;
  Matrix out(s.logits()->rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto pos = std::lower_bound(all.begin(), all.end(), keep[j]) - all.begin();
    out.col(static_cast<Eigen::Index>(j)) = s.logits()->col(pos);
  }
  return SampleSet(s.taxonomy_ptr(), s.records(), s.features(), std::move(out));
}

}  // namespace detail

inline PairData load_pair(const DatasetPair& p, std::size_t pair_index, const ExperimentConfig& cfg) {
  PairData out;
  out.name = p.name;
  out.id_name = p.id_name;
  out.ood_name = p.ood_name;
  out.hierarchical = p.hierarchical;
  if (p.hierarchical) {
    const SampleSet h = load_sample_set(p.manifest, p.features, p.logits);
    // One fixed ID/OOD class split per pair, shared by both regimes.
    IdOodSplit split = select_id_ood_split(h, {p.p, derive_seed(cfg.seed, "select", pair_index)});
    out.warnings = split.warnings;
    out.id = std::make_shared<const SampleSet>(detail::slice_logit_columns(split.id, split.id_classes));
    out.ood = std::make_shared<const SampleSet>(detail::slice_logit_columns(split.ood, split.id_classes));
  } else {
    out.id = std::make_shared<const SampleSet>(load_sample_set(p.id_manifest, p.id_features, p.id_logits));
    out.ood = std::make_shared<const SampleSet>(load_sample_set(p.ood_manifest, p.ood_features, p.ood_logits));
  }
  if (out.id->empty() || out.ood->empty()) throw Error(Errc::EmptyDataset, "pair '" + p.name + "' has an empty side");
  for (const auto& d : cfg.detectors) {
    out.id_payload.push_back({detail::perturbed(out.id->features(), *out.id, d.noise, d.name, "features"),
                              detail::perturbed(out.id->logits(), *out.id, d.noise, d.name, "logits")});
    out.ood_payload.push_back({detail::perturbed(out.ood->features(), *out.ood, d.noise, d.name, "features"),
                               detail::perturbed(out.ood->logits(), *out.ood, d.noise, d.name, "logits")});
  }
  return out;
}

// --- Scoring one round -----------------------------------------------------------

struct RoundContext {
  std::string regime;  // "truth" | "dcv"
  std::size_t run = 0;
  std::string pair;
};

inline std::string expand_pattern(std::string pattern, const RoundContext& ctx, std::size_t round) {
  auto replace = [&](const std::string& key, const std::string& v) {
    for (std::size_t pos; (pos = pattern.find(key)) != std::string::npos;) pattern.replace(pos, key.size(), v);
  };
  replace("{regime}", ctx.regime);
  replace("{run}", std::to_string(ctx.run));
  replace("{pair}", ctx.pair);
  replace("{round}", std::to_string(round));
  return pattern;
}

namespace detail {

inline std::vector<std::size_t> rows_of(const SampleSet& s, const std::vector<SampleId>& ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    const auto i = s.index_of(id);
    if (!i) throw Error(Errc::MissingSample, "sample '" + id + "' not in dataset");
    rows.push_back(*i);
  }
  return rows;
}

inline const Matrix& need(const std::shared_ptr<const Matrix>& m, const std::string& det, const char* what) {
  if (!m) throw Error(Errc::ConfigError, "detector '" + det + "' needs " + what);
  return *m;
}

inline Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace detail

/// Scores for the round's test samples (ID then OOD) for detector `di`.
inline ScoreTable score_round(const PairData& pair, const EvaluationRound& round, const DetectorSpec& det,
                              std::size_t di, const RoundContext& ctx) {
  if (det.type == "external")
    return load_external_scores(expand_pattern(det.path_pattern, ctx, round.round_index), round, det.name);

  const auto test_id_rows = detail::rows_of(*pair.id, round.test_id);
  const auto test_ood_rows = detail::rows_of(*pair.ood, round.test_ood);
  std::vector<SampleId> ids = round.test_id;
  ids.insert(ids.end(), round.test_ood.begin(), round.test_ood.end());

  auto test_matrix = [&](bool features) {
    const auto& idm = detail::need(features ? pair.id_payload[di].features : pair.id_payload[di].logits, det.name,
                                   features ? "features" : "logits");
    const auto& oodm = detail::need(features ? pair.ood_payload[di].features : pair.ood_payload[di].logits,
                                    det.name, features ? "features" : "logits");
    return detail::stack(SampleSet::gather_rows(idm, test_id_rows), SampleSet::gather_rows(oodm, test_ood_rows));
  };

  std::vector<double> scores;
  if (det.type == "ebo") {
    scores = score_ebo(test_matrix(false));
  } else if (det.type == "gen") {
    scores = score_gen(test_matrix(false), {det.gen_gamma, det.gen_top_m});
  } else {
    const auto train_rows = detail::rows_of(*pair.id, round.train_id);
    const Matrix train =
        SampleSet::gather_rows(detail::need(pair.id_payload[di].features, det.name, "features"), train_rows);
    if (det.type == "knn") {
      scores = score_knn(train, test_matrix(true), det.knn_k.value_or(default_knn_neighbors(train_rows.size())));
    } else {  // mds
      const LevelIndex c = pair.id->taxonomy().classification_level();
      std::vector<ClassId> labels;
      labels.reserve(train_rows.size());
      for (std::size_t r : train_rows) labels.push_back(pair.id->records()[r].class_at(c));
      scores = score_mds(fit_mds(train, labels), test_matrix(true));
    }
  }
  return make_score_table(det.name, round.round_index, ids, scores);
}

/// One metric row of the per-round CSV.
struct MetricRow {
  std::string detector;
  std::string id_dataset, ood_dataset;
  std::size_t round = 0;
  MetricReport report;
};

inline std::string metric_row_csv(const MetricRow& r) {
  const auto& m = r.report;
  return fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.detector, r.id_dataset,
                     r.ood_dataset, r.round, m.tpr5, m.auroc, m.aupr, m.f1, m.acc90, m.threshold_acc90, m.n_id,
                     m.n_ood);
}

inline std::vector<MetricRow> parse_metric_csv(const std::string& text) {
  std::vector<MetricRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != kMetricCsvHeader) throw Error(Errc::ManifestParse, "unexpected metric CSV header");
      header = false;
      continue;
    }
    const auto c = split_csv_line(line);
    if (c.size() != 12) throw Error(Errc::ManifestParse, "metric CSV row has " + std::to_string(c.size()) + " cells");
    MetricRow r;
    r.detector = c[0];
    r.id_dataset = c[1];
    r.ood_dataset = c[2];
    r.round = std::stoul(c[3]);
    r.report.tpr5 = std::stod(c[4]);
    r.report.auroc = std::stod(c[5]);
    r.report.aupr = std::stod(c[6]);
    r.report.f1 = std::stod(c[7]);
    r.report.acc90 = std::stod(c[8]);
    r.report.threshold_acc90 = std::stod(c[9]);
    r.report.n_id = std::stoul(c[10]);
    r.report.n_ood = std::stoul(c[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string metric_rows_csv(const std::vector<MetricRow>& rows) {
  std::string out(kMetricCsvHeader);
  out += "\n";
  for (const auto& r : rows) out += metric_row_csv(r);
  return out;
}

// --- Worker pool ------------------------------------------------------------------

inline std::size_t worker_count() {
  if (const char* env = std::getenv("DCVROOD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on a bounded pool; rethrows the first error.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// --- Ledger -------------------------------------------------------------------------

/// Append-only JSONL record of completed work units. Single writer.
class RunLedger {
 public:
  explicit RunLedger(fs::path dir) : dir_(std::move(dir)), path_(dir_ / "ledger.jsonl") {
    fs::create_directories(dir_);
    if (fs::exists(path_)) {
      std::istringstream in(read_text_file(path_));
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;  // torn final line from an interrupted run
        records_.push_back(std::move(j));
      }
    }
  }

  /// Completed record for a unit whose files all still exist.
  std::optional<json> completed(const std::string& unit) const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->value("unit", "") != unit) continue;
      for (const auto& f : it->at("files"))
        if (!fs::exists(dir_ / f.get<std::string>())) return std::nullopt;
      return *it;
    }
    return std::nullopt;
  }

  void append(json record) {
    record["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(Errc::Io, "cannot append to " + path_.string());
    out << record.dump() << "\n";
    records_.push_back(std::move(record));
  }

  const std::vector<json>& records() const noexcept { return records_; }
  const fs::path& dir() const noexcept { return dir_; }

 private:
  fs::path dir_;
  fs::path path_;
  std::vector<json> records_;
};

// --- Results ------------------------------------------------------------------------

/// runs[run][metric] -> one ResultVector per detector (config order).
struct RegimeResults {
  std::string regime;
  ContextGranularity context = ContextGranularity::PairMean;
  std::vector<std::string> detectors;
  std::vector<std::string> pairs;
  std::vector<std::map<std::string, std::vector<ResultVector>>> runs;
};

inline json results_to_json(const RegimeResults& r) {
  json j{{"regime", r.regime}, {"context", context_name(r.context)}, {"detectors", r.detectors}, {"pairs", r.pairs}};
  auto runs = json::array();
  for (const auto& run : r.runs) {
    json rj = json::object();
    for (const auto& [metric, vecs] : run) {
      json mj = json::object();
      for (const auto& v : vecs) mj[v.detector] = v.values;
      rj[metric] = std::move(mj);
    }
    runs.push_back(std::move(rj));
  }
  j["runs"] = std::move(runs);
  return j;
}

inline RegimeResults results_from_json(const json& j) {
  try {
    RegimeResults r;
    r.regime = j.at("regime").get<std::string>();
    r.context = j.at("context").get<std::string>() == "fold" ? ContextGranularity::Fold : ContextGranularity::PairMean;
    r.detectors = j.at("detectors").get<std::vector<std::string>>();
    r.pairs = j.at("pairs").get<std::vector<std::string>>();
    for (const auto& rj : j.at("runs")) {
      std::map<std::string, std::vector<ResultVector>> run;
      for (const auto& [metric, mj] : rj.items()) {
        std::vector<ResultVector> vecs;
        for (const auto& d : r.detectors) vecs.push_back({d, metric, mj.at(d).get<std::vector<double>>()});
        run.emplace(metric, std::move(vecs));
      }
      r.runs.push_back(std::move(run));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestParse, std::string("results.json: ") + e.what());
  }
}

inline RegimeResults load_results(const fs::path& dir) {
  return results_from_json(json::parse(read_text_file(dir / "results.json")));
}

namespace detail {

/// Groups metric rows (pair, detector) -> per-round values in row order.
inline std::map<std::string, std::vector<ResultVector>> aggregate_rows(
    const std::vector<std::vector<MetricRow>>& rows_by_pair, const std::vector<std::string>& detectors,
    ContextGranularity ctx) {
  std::map<std::string, std::vector<ResultVector>> out;
  for (Metric m : kAllMetrics) {
    std::vector<ResultVector> vecs;
    for (const auto& d : detectors) {
      ResultVector v{d, std::string(metric_name(m)), {}};
      for (const auto& rows : rows_by_pair) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows) {
          if (r.detector != d) continue;
          if (ctx == ContextGranularity::Fold) v.values.push_back(metric_value(r.report, m));
          sum += metric_value(r.report, m);
          ++n;
        }
        if (ctx == ContextGranularity::PairMean && n > 0) v.values.push_back(sum / static_cast<double>(n));
      }
      vecs.push_back(std::move(v));
    }
    out.emplace(std::string(metric_name(m)), std::move(vecs));
  }
  return out;
}

inline void write_warnings(const fs::path& dir, const std::vector<std::string>& warnings) {
  std::string text;
  for (const auto& w : warnings) text += w + "\n";
  write_text_file(dir / "warnings.log", text);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

struct RunOptions {
  bool resume = false;
};

// --- Benchmark-truth regime -------------------------------------------------------

struct ConvergencePoint {
  std::size_t rep = 0;  // one-based
  std::string metric;
  double max_window_delta = 0.0;
};

struct TruthOutput {
  RegimeResults results;
  std::vector<std::vector<MetricRow>> rows_by_rep;  // [rep] rows over all pairs
  /// running_means[metric][detector][rep]
  std::map<std::string, std::vector<std::vector<double>>> running_means;
  std::vector<ConvergencePoint> trace;
  std::vector<std::string> warnings;
};

/// Random train/test split of one pair for one benchmark repetition: simple
/// random sampling of ID samples, and a disjoint random subset of OOD classes
/// held out for testing (the rest stay available for training).
inline EvaluationRound truth_split(const PairData& pair, const ExperimentConfig& cfg, std::uint64_t seed) {
  SplitMix64 rng(seed);
  EvaluationRound r;
  std::vector<SampleId> ids;
  for (const auto& rec : pair.id->records()) ids.push_back(rec.id);
  seeded_shuffle(std::span(ids), rng);
  const auto n_id = ids.size();
  auto n_test = static_cast<std::size_t>(std::llround(cfg.id_test_fraction() * static_cast<double>(n_id)));
  n_test = std::clamp<std::size_t>(n_test, 1, std::max<std::size_t>(1, n_id - 1));
  r.test_id.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  r.train_id.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());

  const LevelIndex c = pair.ood->taxonomy().classification_level();
  std::vector<ClassId> classes = pair.ood->present_classes(c);
  seeded_shuffle(std::span(classes), rng);
  auto n_cls = static_cast<std::size_t>(std::llround(cfg.ood_test_fraction() * static_cast<double>(classes.size())));
  n_cls = std::clamp<std::size_t>(n_cls, 1, std::max<std::size_t>(1, classes.size() - 1));
  const std::set<ClassId> test_classes(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_cls));
  for (const auto& rec : pair.ood->records())
    (test_classes.contains(rec.class_at(c)) ? r.test_ood : r.train_ood).push_back(rec.id);
  std::sort(r.test_id.begin(), r.test_id.end());
  std::sort(r.train_id.begin(), r.train_id.end());
  return r;
}

inline std::vector<MetricRow> evaluate_pair_round(const PairData& pair, const EvaluationRound& round,
                                                  const ExperimentConfig& cfg, const RoundContext& ctx) {
  std::vector<MetricRow> rows;
  for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
    const ScoreTable t = score_round(pair, round, cfg.detectors[di], di, ctx);
    rows.push_back({cfg.detectors[di].name, pair.id_name, pair.ood_name, round.round_index, evaluate_round(t, round)});
  }
  return rows;
}

inline std::vector<PairData> load_pairs(const ExperimentConfig& cfg, std::vector<std::string>& warnings) {
  std::vector<PairData> pairs;
  for (std::size_t i = 0; i < cfg.dataset_pairs.size(); ++i) {
    pairs.push_back(load_pair(cfg.dataset_pairs[i], i, cfg));
    for (const auto& w : pairs.back().warnings) warnings.push_back(pairs.back().name + ": " + w);
  }
  return pairs;
}

/// Running means over repetitions of each (detector, metric), averaged over
/// pairs, and the trace max_detector |mu_r - mu_{max(1, r - w)}|.
inline void convergence_trace(TruthOutput& out, const ExperimentConfig& cfg) {
  const auto& dets = out.results.detectors;
  const std::size_t reps = out.rows_by_rep.size();
  for (Metric m : kAllMetrics) {
    const std::string name(metric_name(m));
    auto& means = out.running_means[name];
    means.assign(dets.size(), std::vector<double>(reps, 0.0));
    for (std::size_t d = 0; d < dets.size(); ++d) {
      double cumulative = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : out.rows_by_rep[r])
          if (row.detector == dets[d]) {
            sum += metric_value(row.report, m);
            ++n;
          }
        cumulative += n > 0 ? sum / static_cast<double>(n) : 0.0;
        means[d][r] = cumulative / static_cast<double>(r + 1);
      }
    }
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t back = r >= cfg.convergence_window ? r - cfg.convergence_window : 0;
      double delta = 0.0;
      for (std::size_t d = 0; d < dets.size(); ++d) delta = std::max(delta, std::abs(means[d][r] - means[d][back]));
      out.trace.push_back({r + 1, name, delta});
    }
  }
}

inline TruthOutput run_benchmark_truth(const ExperimentConfig& cfg, RunOptions opt = {}) {
  const fs::path dir = cfg.output_dir / "truth";
  RunLedger ledger(dir);
  TruthOutput out;
  auto pairs = load_pairs(cfg, out.warnings);
  out.results.regime = "truth";
  out.results.context = cfg.context;
  for (const auto& d : cfg.detectors) out.results.detectors.push_back(d.name);
  for (const auto& p : pairs) out.results.pairs.push_back(p.name);

  out.rows_by_rep.resize(cfg.r_truth);
  std::vector<char> cached(cfg.r_truth, 0);
  if (opt.resume)
    for (std::size_t r = 0; r < cfg.r_truth; ++r)
      if (auto rec = ledger.completed(fmt::format("truth/{}", r))) {
        out.rows_by_rep[r] = parse_metric_csv(read_text_file(dir / fmt::format("rep_{:03}.csv", r)));
        cached[r] = 1;
      }

  std::vector<double> wall(cfg.r_truth, 0.0);
  parallel_for(cfg.r_truth, [&](std::size_t r) {
    if (cached[r]) return;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed_r = derive_seed(cfg.seed, "truth", r);
    std::vector<MetricRow> rows;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      EvaluationRound round = truth_split(pairs[p], cfg, derive_seed(seed_r, "pair", p));
      round.round_index = r;
      auto pr = evaluate_pair_round(pairs[p], round, cfg, {"truth", r, pairs[p].name});
      rows.insert(rows.end(), pr.begin(), pr.end());
    }
    out.rows_by_rep[r] = std::move(rows);
    wall[r] = detail::seconds_since(t0);
  });

  for (std::size_t r = 0; r < cfg.r_truth; ++r) {
    if (cached[r]) continue;
    const std::string file = fmt::format("rep_{:03}.csv", r);
    write_text_file(dir / file, metric_rows_csv(out.rows_by_rep[r]));
    ledger.append({{"unit", fmt::format("truth/{}", r)}, {"regime", "truth"}, {"run", r},
                   {"seed", derive_seed(cfg.seed, "truth", r)}, {"files", {file}}, {"warnings", json::array()},
                   {"wall_time_s", wall[r]}});
  }

  // Benchmark vectors: pair-mean over all repetitions, or every (pair, rep) value.
  std::vector<std::vector<MetricRow>> by_pair(pairs.size());
  for (const auto& rows : out.rows_by_rep)
    for (const auto& row : rows)
      for (std::size_t p = 0; p < pairs.size(); ++p)
        if (row.id_dataset == pairs[p].id_name && row.ood_dataset == pairs[p].ood_name) by_pair[p].push_back(row);
  out.results.runs.push_back(detail::aggregate_rows(by_pair, out.results.detectors, cfg.context));

  convergence_trace(out, cfg);
  std::string means_csv = "rep,detector,metric,running_mean\n";
  for (const auto& [metric, per_det] : out.running_means)
    for (std::size_t d = 0; d < per_det.size(); ++d)
      for (std::size_t r = 0; r < per_det[d].size(); ++r)
        means_csv += fmt::format("{},{},{},{:.17g}\n", r + 1, out.results.detectors[d], metric, per_det[d][r]);
  std::string trace_csv = "rep,metric,max_window_delta\n";
  for (const auto& p : out.trace) trace_csv += fmt::format("{},{},{:.17g}\n", p.rep, p.metric, p.max_window_delta);
  for (const auto& p : out.trace)
    if (p.rep == cfg.r_truth && p.max_window_delta >= cfg.convergence_threshold)
      out.warnings.push_back(fmt::format("convergence: {} window delta {:.6f} >= {} after {} repetitions", p.metric,
                                         p.max_window_delta, cfg.convergence_threshold, cfg.r_truth));

  write_text_file(dir / "running_means.csv", means_csv);
  write_text_file(dir / "convergence.csv", trace_csv);
  write_text_file(dir / "results.json", results_to_json(out.results).dump(2) + "\n");
  write_text_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  detail::write_warnings(dir, out.warnings);
  ledger.append({{"unit", "truth/aggregate"}, {"regime", "truth"}, {"run", nullptr}, {"seed", cfg.seed},
                 {"files", {"results.json", "running_means.csv", "convergence.csv", "config.json", "warnings.log"}},
                 {"warnings", out.warnings}, {"wall_time_s", 0.0}});
  return out;
}

// --- Dual cross-validation regime ---------------------------------------------------

struct DcvOutput {
  RegimeResults results;
  std::vector<std::vector<MetricRow>> rows_by_experiment;
  std::vector<std::string> warnings;
};

/// Folds for one pair in one experiment: flat dual folds, or hierarchical
/// folds when the pair came from a single hierarchical manifest.
inline std::pair<FoldAssignment, FoldAssignment> build_pair_folds(const PairData& pair, const ExperimentConfig& cfg,
                                                                  std::uint64_t seed) {
  if (pair.hierarchical) return build_folds_hierarchical(*pair.id, *pair.ood, cfg.k, seed);
  return build_folds_flat(*pair.id, *pair.ood, cfg.k, seed,
                          cfg.random_id_folds ? IdFolding::Random : IdFolding::Stratified);
}

inline DcvOutput run_dcv_rood(const ExperimentConfig& cfg, RunOptions opt = {}) {
  const fs::path dir = cfg.output_dir / "dcv";
  RunLedger ledger(dir);
  DcvOutput out;
  auto pairs = load_pairs(cfg, out.warnings);
  out.results.regime = "dcv";
  out.results.context = cfg.context;
  for (const auto& d : cfg.detectors) out.results.detectors.push_back(d.name);
  for (const auto& p : pairs) out.results.pairs.push_back(p.name);

  struct Experiment {
    std::vector<MetricRow> rows;
    std::vector<std::pair<std::string, std::string>> files;  // (relative path, contents)
    std::vector<std::string> warnings;
    double wall = 0.0;
    bool cached = false;
  };
  std::vector<Experiment> exps(cfg.e_runs);
  if (opt.resume)
    for (std::size_t e = 0; e < cfg.e_runs; ++e)
      if (auto rec = ledger.completed(fmt::format("dcv/{}", e))) {
        exps[e].rows = parse_metric_csv(read_text_file(dir / fmt::format("exp_{:02}/metrics.csv", e)));
        exps[e].warnings = rec->value("warnings", std::vector<std::string>{});
        exps[e].cached = true;
      }

  parallel_for(cfg.e_runs, [&](std::size_t e) {
    Experiment& x = exps[e];
    if (x.cached) return;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed_e = derive_seed(cfg.seed, "dcv", e);
    const std::string sub = fmt::format("exp_{:02}", e);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto [f_id, f_ood] = build_pair_folds(pairs[p], cfg, derive_seed(seed_e, "pair", p));
      for (const auto& w : f_id.warnings) x.warnings.push_back(pairs[p].name + " (ID): " + w);
      for (const auto& w : f_ood.warnings) x.warnings.push_back(pairs[p].name + " (OOD): " + w);
      x.files.emplace_back(sub + "/folds_" + pairs[p].name + "_id.json", folds_manifest_string(f_id));
      x.files.emplace_back(sub + "/folds_" + pairs[p].name + "_ood.json", folds_manifest_string(f_ood));
      for (const auto& round : assemble_rounds(f_id, f_ood)) {
        auto pr = evaluate_pair_round(pairs[p], round, cfg, {"dcv", e, pairs[p].name});
        x.rows.insert(x.rows.end(), pr.begin(), pr.end());
      }
    }
    x.files.emplace_back(sub + "/metrics.csv", metric_rows_csv(x.rows));
    x.wall = detail::seconds_since(t0);
  });

  for (std::size_t e = 0; e < cfg.e_runs; ++e) {
    Experiment& x = exps[e];
    if (!x.cached) {
      json files = json::array();
      for (const auto& [rel, text] : x.files) {
        write_text_file(dir / rel, text);
        files.push_back(rel);
      }
      ledger.append({{"unit", fmt::format("dcv/{}", e)}, {"regime", "dcv"}, {"run", e},
                     {"seed", derive_seed(cfg.seed, "dcv", e)}, {"files", files}, {"warnings", x.warnings},
                     {"wall_time_s", x.wall}});
    }
    for (const auto& w : x.warnings) out.warnings.push_back(fmt::format("exp {}: {}", e, w));
    std::vector<std::vector<MetricRow>> by_pair(pairs.size());
    for (const auto& row : x.rows)
      for (std::size_t p = 0; p < pairs.size(); ++p)
        if (row.id_dataset == pairs[p].id_name && row.ood_dataset == pairs[p].ood_name) by_pair[p].push_back(row);
    out.results.runs.push_back(detail::aggregate_rows(by_pair, out.results.detectors, cfg.context));
    out.rows_by_experiment.push_back(std::move(x.rows));
  }

  write_text_file(dir / "results.json", results_to_json(out.results).dump(2) + "\n");
  write_text_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  detail::write_warnings(dir, out.warnings);
  ledger.append({{"unit", "dcv/aggregate"}, {"regime", "dcv"}, {"run", nullptr}, {"seed", cfg.seed},
                 {"files", {"results.json", "config.json", "warnings.log"}}, {"warnings", json::array()}, {"wall_time_s", 0.0}});
  return out;
}

// --- Comparison ------------------------------------------------------------------

struct CompareOutput {
  std::map<std::string, SignificanceMatrix> benchmark;        // per metric
  std::map<std::string, std::vector<SignificanceMatrix>> cv;  // per metric, per run
  std::vector<FidelityReport> fidelity;                       // metric-major, alpha-minor
  std::vector<MethodwiseTable> methodwise;                    // per metric
};

inline std::string alpha_tag(double a) { return fmt::format("{:g}", a); }

inline std::string fidelity_summary_csv(const std::vector<FidelityReport>& reports) {
  std::string out = "metric,alpha,runs,hit_rate,error_rate,benchmark_pairs,nonbenchmark_pairs\n";
  for (const auto& r : reports)
    out += fmt::format("{},{},{},{},{},{},{}\n", r.metric, alpha_tag(r.alpha), r.runs, format_rate(r.hit_rate),
                       format_rate(r.error_rate), r.benchmark_pairs, r.nonbenchmark_pairs);
  return out;
}

inline std::string fidelity_summary_text(const std::vector<FidelityReport>& reports) {
  std::string out = fmt::format("{:<22} {:>10} {:>10}\n", "Metric", "Hit rate", "Error rate");
  for (const auto& r : reports)
    out += fmt::format("{:<22} {:>10} {:>10}\n", fmt::format("{}_pval<{}", r.metric, alpha_tag(r.alpha)),
                       format_rate(r.hit_rate), format_rate(r.error_rate));
  return out;
}

/// Writes every comparison table under `dir` and records them in its ledger.
inline void write_compare_outputs(const CompareOutput& c, const fs::path& dir) {
  RunLedger ledger(dir);
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [metric, m] : c.benchmark) {
    files.emplace_back("significance_" + metric + "_truth.csv", significance_matrix_csv(m));
    files.emplace_back("significance_" + metric + "_truth_tests.csv", significance_tests_csv(m));
    files.emplace_back("significance_" + metric + "_truth.txt", significance_matrix_text(m));
  }
  for (const auto& [metric, runs] : c.cv)
    for (std::size_t e = 0; e < runs.size(); ++e) {
      files.emplace_back(fmt::format("significance_{}_cv{:02}.csv", metric, e), significance_matrix_csv(runs[e]));
      files.emplace_back(fmt::format("significance_{}_cv{:02}_tests.csv", metric, e), significance_tests_csv(runs[e]));
    }
  for (const auto& r : c.fidelity)
    files.emplace_back(fmt::format("fidelity_{}_alpha{}.csv", r.metric, alpha_tag(r.alpha)), fidelity_counts_csv(r));
  files.emplace_back("fidelity_summary.csv", fidelity_summary_csv(c.fidelity));
  files.emplace_back("fidelity_summary.txt", fidelity_summary_text(c.fidelity));
  std::string mw = "metric,alpha,flagged\n";
  std::string mw_text;
  for (const auto& t : c.methodwise) {
    mw_text += t.metric;
    for (std::size_t a = 0; a < t.alphas.size(); ++a) {
      mw += fmt::format("{},{},\"{}\"\n", t.metric, alpha_tag(t.alphas[a]), format_methodwise_cell(t.flagged[a]));
      mw_text += fmt::format(" | p<={}: {}", alpha_tag(t.alphas[a]), format_methodwise_cell(t.flagged[a]));
    }
    mw_text += "\n";
    std::string pv = "run";
    for (const auto& d : t.detectors) pv += "," + d;
    pv += "\n";
    for (std::size_t e = 0; e < t.p_values.size(); ++e) {
      pv += std::to_string(e + 1);
      for (double p : t.p_values[e]) pv += fmt::format(",{:.10g}", p);
      pv += "\n";
    }
    files.emplace_back("methodwise_pvalues_" + t.metric + ".csv", pv);
  }
  if (!c.methodwise.empty()) {
    files.emplace_back("methodwise.csv", mw);
    files.emplace_back("methodwise.txt", mw_text);
  }
  json names = json::array();
  for (const auto& [rel, text] : files) {
    write_text_file(dir / rel, text);
    names.push_back(rel);
  }
  ledger.append({{"unit", "compare"}, {"regime", "compare"}, {"run", nullptr}, {"files", names},
                 {"warnings", json::array()}, {"wall_time_s", 0.0}});
}

/// Significance matrices, hit/error rates at every alpha and the method-wise
/// table for each metric present in both result sets.
inline CompareOutput compare(const RegimeResults& truth, const RegimeResults& dcv, const std::vector<double>& alphas,
                             PairwiseOptions popt = {}) {
  if (truth.detectors != dcv.detectors) throw Error(Errc::DetectorMismatch, "truth and DCV detector lists differ");
  if (truth.runs.size() != 1) throw Error(Errc::InvalidArgument, "benchmark results must hold exactly one run");
  CompareOutput out;
  for (const auto& [metric, bench_vecs] : truth.runs.front()) {
    std::vector<std::vector<ResultVector>> cv_vecs;
    for (const auto& run : dcv.runs) {
      const auto it = run.find(metric);
      if (it == run.end()) throw Error(Errc::DetectorMismatch, "DCV results lack metric " + metric);
      cv_vecs.push_back(it->second);
    }
    SignificanceMatrix bench = pairwise_matrix(bench_vecs, popt);
    std::vector<SignificanceMatrix> runs;
    for (const auto& v : cv_vecs) runs.push_back(pairwise_matrix(v, popt));
    for (double a : alphas) out.fidelity.push_back(hit_error_rates(bench, runs, a, metric));
    out.methodwise.push_back(methodwise_comparison(bench_vecs, cv_vecs, alphas, metric));
    out.benchmark.emplace(metric, std::move(bench));
    out.cv.emplace(metric, std::move(runs));
  }
  return out;
}

/// Fidelity from a stored benchmark p-value matrix and per-pair counts of
/// significant CV runs (the form in which summary tables usually report them).
inline std::vector<FidelityReport> compare_from_counts(const SignificanceMatrix& benchmark,
                                                       const std::vector<std::vector<int>>& counts, std::size_t runs,
                                                       const std::vector<double>& alphas, const std::string& metric) {
  std::vector<FidelityReport> out;
  for (double a : alphas) out.push_back(hit_error_rates_from_counts(benchmark, counts, runs, a, metric));
  return out;
}

// --- Synthetic fixture suite --------------------------------------------------------

struct SynthSuiteOptions {
  std::uint64_t seed = 1;
  std::vector<double> separations{1.0, 1.5, 2.0, 2.5, 3.0};
  bool hierarchical_pair = true;
  std::vector<double> noise_levels{0.0, 1.0};
  SynthFlatOptions flat;
  SynthHierOptions hier;
  double hier_p = 0.4;
};

/// Writes manifests, payloads and a ready-to-run config.json under `dir`.
/// Detectors: the four built-in scorers at every noise level.
inline ExperimentConfig write_synth_suite(const fs::path& dir, const SynthSuiteOptions& o) {
  fs::create_directories(dir);
  json cfg;
  auto pairs = json::array();
  for (std::size_t i = 0; i < o.separations.size(); ++i) {
    SynthFlatOptions fo = o.flat;
    fo.separation = o.separations[i];
    fo.id_prefix = fmt::format("p{}id", i);
    fo.ood_prefix = fmt::format("p{}ood", i);
    const SynthPair sp = synth_flat_pair(fo, derive_seed(o.seed, "synth-flat", i));
    const std::string name = fmt::format("pair{}_sep{:g}", i, o.separations[i]);
    const fs::path sub = dir / name;
    write_text_file(sub / "id.json", write_manifest(sp.id));
    write_text_file(sub / "ood.json", write_manifest(sp.ood));
    write_matrix_binary(sub / "id_features.bin", *sp.id.features());
    write_matrix_binary(sub / "id_logits.bin", *sp.id.logits());
    write_matrix_binary(sub / "ood_features.bin", *sp.ood.features());
    write_matrix_binary(sub / "ood_logits.bin", *sp.ood.logits());
    pairs.push_back({{"name", name}, {"id_name", name + "-id"}, {"ood_name", name + "-ood"},
                     {"id_manifest", name + "/id.json"}, {"ood_manifest", name + "/ood.json"},
                     {"id_features", name + "/id_features.bin"}, {"id_logits", name + "/id_logits.bin"},
                     {"ood_features", name + "/ood_features.bin"}, {"ood_logits", name + "/ood_logits.bin"}});
  }
  if (o.hierarchical_pair) {
    const SampleSet h = synth_hierarchical(o.hier, derive_seed(o.seed, "synth-hier", 0));
    const std::string name = "hier";
    write_text_file(dir / name / "manifest.json", write_manifest(h));
    write_matrix_binary(dir / name / "features.bin", *h.features());
    write_matrix_binary(dir / name / "logits.bin", *h.logits());
    pairs.push_back({{"name", name}, {"hierarchical", true}, {"manifest", name + "/manifest.json"},
                     {"features", name + "/features.bin"}, {"logits", name + "/logits.bin"}, {"p", o.hier_p},
                     {"id_name", "hier-id"}, {"ood_name", "hier-ood"}});
  }
  cfg["dataset_pairs"] = std::move(pairs);
  auto dets = json::array();
  for (double noise : o.noise_levels)
    for (const char* type : {"ebo", "gen", "knn", "mds"})
      dets.push_back({{"name", noise == 0.0 ? std::string(type) : fmt::format("{}_n{:g}", type, noise)},
                      {"type", type}, {"noise", noise}});
  cfg["detectors"] = std::move(dets);
  cfg["k"] = 5;
  cfg["e_runs"] = 10;
  cfg["r_truth"] = 100;
  cfg["seed"] = o.seed;
  cfg["output_dir"] = "out";
  write_text_file(dir / "config.json", cfg.dump(2) + "\n");
  return config_from_json(cfg, dir);
}

}  // namespace dcvrood

#endif  // DCVROOD_HARNESS_HPP_
