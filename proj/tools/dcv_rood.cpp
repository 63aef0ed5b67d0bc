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

// dcv-rood command line: fold construction, scoring, evaluation and the
// benchmark / dual cross-validation experiment regimes.

#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dcvrood/dcvrood.hpp"

namespace {

using namespace dcvrood;

constexpr std::size_t kConsoleWarnings = 10;

// Echoes warnings to stderr, the rest summarized; `log` holds the full list.
void print_warnings(const std::vector<std::string>& warnings, const fs::path& log) {
  for (std::size_t i = 0; i < std::min(warnings.size(), kConsoleWarnings); ++i)
    std::cerr << "warning: " << warnings[i] << "\n";
  if (warnings.size() > kConsoleWarnings)
    std::cerr << "warning: " << warnings.size() - kConsoleWarnings << " more in " << log.string() << "\n";
}

void emit_warnings(const fs::path& dir, const std::vector<std::string>& warnings) {
  std::string text;
  for (const auto& w : warnings) text += w + "\n";
  write_text_file(dir / "warnings.log", text);
  print_warnings(warnings, dir / "warnings.log");
}

SampleSet subset_by_ids(const SampleSet& s, const std::vector<SampleId>& ids) {
  std::vector<std::size_t> rows;
  for (const auto& id : ids) {
    const auto i = s.index_of(id);
    if (!i) throw Error(Errc::MissingSample, "fold sample '" + id + "' not in manifest");
    rows.push_back(*i);
  }
  std::sort(rows.begin(), rows.end());
  return s.subset(rows);
}

std::vector<SampleId> all_ids(const FoldAssignment& f) {
  std::vector<SampleId> out;
  for (const auto& [id, fold] : f.fold_of_sample) out.push_back(id);
  return out;
}

FoldAssignment read_folds(const fs::path& p) {
  const auto j = nlohmann::json::parse(read_text_file(p), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ManifestParse, p.string() + " is not valid JSON");
  return folds_from_json(j);
}

struct SplitArgs {
  std::string manifest, id, ood, out = ".", method;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  double p = 0.4;
  bool random_id = false;
};

void run_split(const SplitArgs& a) {
  const fs::path out = a.out;
  std::vector<std::string> warnings;
  if (!a.id.empty() || !a.ood.empty()) {
    if (a.id.empty() || a.ood.empty()) throw Error(Errc::InvalidArgument, "--id and --ood go together");
    const auto d_id = load_sample_set(a.id), d_ood = load_sample_set(a.ood);
    auto [f_id, f_ood] =
        build_folds_flat(d_id, d_ood, a.k, a.seed, a.random_id ? IdFolding::Random : IdFolding::Stratified);
    write_text_file(out / "folds_id.json", folds_manifest_string(f_id));
    write_text_file(out / "folds_ood.json", folds_manifest_string(f_ood));
    warnings = f_id.warnings;
    warnings.insert(warnings.end(), f_ood.warnings.begin(), f_ood.warnings.end());
  } else if (!a.manifest.empty()) {
    const auto s = load_sample_set(a.manifest);
    const LevelIndex c = s.taxonomy().classification_level();
    if (!a.method.empty() || c == 0) {
      const FoldMethod m = a.method.empty() ? FoldMethod::Stratified : parse_fold_method(a.method);
      FoldAssignment f;
      switch (m) {
        case FoldMethod::Stratified: f = stratified_k_fold(s, c, a.k, a.seed); break;
        case FoldMethod::Group: f = group_k_fold(s, c, a.k, a.seed); break;
        case FoldMethod::Random: f = random_k_fold(s, a.k, a.seed); break;
        case FoldMethod::HierarchicalOod: throw Error(Errc::InvalidArgument, "use --p for hierarchical folds");
      }
      write_text_file(out / "folds.json", folds_manifest_string(f));
      warnings = f.warnings;
    } else {
      const IdOodSplit split = select_id_ood_split(s, {a.p, derive_seed(a.seed, "select", 0)});
      auto [f_id, f_ood] = build_folds_hierarchical(split.id, split.ood, a.k, a.seed);
      nlohmann::json sj{{"p", a.p}, {"id_classes", split.id_classes}, {"ood_classes", split.ood_classes}};
      write_text_file(out / "split.json", sj.dump(2) + "\n");
      write_text_file(out / "folds_id.json", folds_manifest_string(f_id));
      write_text_file(out / "folds_ood.json", folds_manifest_string(f_ood));
      warnings = split.warnings;
      warnings.insert(warnings.end(), f_id.warnings.begin(), f_id.warnings.end());
      warnings.insert(warnings.end(), f_ood.warnings.begin(), f_ood.warnings.end());
    }
  } else {
    throw Error(Errc::InvalidArgument, "give --manifest, or --id with --ood");
  }
  emit_warnings(out, warnings);
}

struct ScoreArgs {
  std::string manifest, features, logits;
  std::string id, ood, id_features, id_logits, ood_features, ood_logits;
  std::string folds_id, folds_ood, out = ".";
  std::string detector, name;
  double gamma = 0.1;
  std::size_t top_m = 0, knn_k = 0;
};

std::optional<fs::path> opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void run_score(const ScoreArgs& a) {
  const FoldAssignment f_id = read_folds(a.folds_id), f_ood = read_folds(a.folds_ood);
  PairData pair;
  pair.name = "pair";
  if (!a.manifest.empty()) {
    const auto h = load_sample_set(a.manifest, opt(a.features), opt(a.logits));
    SampleSet id = subset_by_ids(h, all_ids(f_id));
    const auto id_classes = id.present_classes(h.taxonomy().classification_level());
    pair.id = std::make_shared<const SampleSet>(detail::slice_logit_columns(id, id_classes));
    pair.ood = std::make_shared<const SampleSet>(
        detail::slice_logit_columns(subset_by_ids(h, all_ids(f_ood)), id_classes));
  } else {
    pair.id = std::make_shared<const SampleSet>(load_sample_set(a.id, opt(a.id_features), opt(a.id_logits)));
    pair.ood = std::make_shared<const SampleSet>(load_sample_set(a.ood, opt(a.ood_features), opt(a.ood_logits)));
  }
  DetectorSpec det;
  det.type = a.detector;
  det.name = a.name.empty() ? a.detector : a.name;
  det.gen_gamma = a.gamma;
  if (a.top_m > 0) det.gen_top_m = a.top_m;
  if (a.knn_k > 0) det.knn_k = a.knn_k;
  if (det.type == "external") throw Error(Errc::InvalidArgument, "external scores are not computed by 'score'");
  pair.id_payload.push_back({detail::perturbed(pair.id->features(), *pair.id, 0.0, det.name, "features"),
                             detail::perturbed(pair.id->logits(), *pair.id, 0.0, det.name, "logits")});
  pair.ood_payload.push_back({detail::perturbed(pair.ood->features(), *pair.ood, 0.0, det.name, "features"),
                              detail::perturbed(pair.ood->logits(), *pair.ood, 0.0, det.name, "logits")});
  for (const auto& round : assemble_rounds(f_id, f_ood)) {
    const ScoreTable t = score_round(pair, round, det, 0, {"score", 0, pair.name});
    write_scores_csv(fs::path(a.out) / fmt::format("scores_{}_round{}.csv", det.name, round.round_index), t);
  }
}

struct EvalArgs {
  std::string folds_id, folds_ood, scores, out = "metrics.csv";
  std::vector<std::string> detectors;
  std::string id_name = "id", ood_name = "ood";
};

void run_eval(const EvalArgs& a) {
  const FoldAssignment f_id = read_folds(a.folds_id), f_ood = read_folds(a.folds_ood);
  std::vector<MetricRow> rows;
  for (const auto& d : a.detectors) {
    std::string pattern = a.scores;
    for (std::size_t pos; (pos = pattern.find("{detector}")) != std::string::npos;) pattern.replace(pos, 10, d);
    for (const auto& round : assemble_rounds(f_id, f_ood)) {
      const ScoreTable t = load_external_scores(expand_pattern(pattern, {}, round.round_index), round, d);
      rows.push_back({d, a.id_name, a.ood_name, round.round_index, evaluate_round(t, round)});
    }
  }
  write_text_file(a.out, metric_rows_csv(rows));
}

struct RegimeArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool resume = false;
};

ExperimentConfig regime_config(const RegimeArgs& a) {
  auto sets = a.sets;
  if (!a.out.empty()) {
    sets.push_back("output_dir=" + nlohmann::json(fs::absolute(a.out).string()).dump());
  }
  return load_config(a.config, sets);
}

struct CompareArgs {
  std::string truth, dcv, out;
  std::vector<double> alphas;
  double alpha_normality = 0.05;
  bool welch = false;
  std::string benchmark_csv, counts_csv, metric = "tpr5";
  std::size_t runs = 10;
};

void run_compare(const CompareArgs& a) {
  std::vector<double> alphas = a.alphas.empty() ? std::vector<double>{0.1, 0.05, 0.01} : a.alphas;
  if (!a.benchmark_csv.empty()) {
    if (a.counts_csv.empty()) throw Error(Errc::InvalidArgument, "--benchmark-csv needs --counts-csv");
    const auto bench = significance_matrix_from_csv(read_text_file(a.benchmark_csv));
    const auto counts = count_matrix_from_csv(read_text_file(a.counts_csv), bench.detectors);
    const auto reports = compare_from_counts(bench, counts, a.runs, alphas, a.metric);
    if (!a.out.empty()) {
      const fs::path out = a.out;
      for (const auto& r : reports)
        write_text_file(out / fmt::format("fidelity_{}_alpha{}.csv", r.metric, alpha_tag(r.alpha)),
                        fidelity_counts_csv(r));
      write_text_file(out / "fidelity_summary.csv", fidelity_summary_csv(reports));
    }
    std::cout << fidelity_summary_text(reports);
    return;
  }
  if (a.truth.empty() || a.dcv.empty()) throw Error(Errc::InvalidArgument, "give --truth and --dcv directories");
  const RegimeResults truth = load_results(a.truth), dcv = load_results(a.dcv);
  PairwiseOptions popt{a.alpha_normality, a.welch ? TTestVariant::Welch : TTestVariant::Pooled};
  const CompareOutput c = compare(truth, dcv, alphas, popt);
  const fs::path out = a.out.empty() ? fs::path(a.dcv).parent_path() / "compare" : fs::path(a.out);
  write_compare_outputs(c, out);
  std::cout << fidelity_summary_text(c.fidelity);
}

struct SynthArgs {
  std::string out = "synth";
  std::uint64_t seed = 1;
  std::vector<double> separations, noise;
  bool no_hier = false;
  std::size_t dim = 16, id_per_class = 200, ood_per_class = 50;
};

void run_synth(const SynthArgs& a) {
  SynthSuiteOptions o;
  o.seed = a.seed;
  if (!a.separations.empty()) o.separations = a.separations;
  if (!a.noise.empty()) o.noise_levels = a.noise;
  o.hierarchical_pair = !a.no_hier;
  o.flat.dim = a.dim;
  o.flat.id_per_class = a.id_per_class;
  o.flat.ood_per_class = a.ood_per_class;
  write_synth_suite(a.out, o);
  std::cout << (fs::path(a.out) / "config.json").string() << "\n";
}

int real_main(int argc, char** argv) {
  CLI::App app{"Dual cross-validation for out-of-distribution detection benchmarks", "dcv-rood"};
  app.require_subcommand(1);

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "Write fold manifests");
  split->add_option("--manifest", sa.manifest, "Single dataset manifest (hierarchical when it has a strata level)");
  split->add_option("--id", sa.id, "ID manifest of a flat pair");
  split->add_option("--ood", sa.ood, "OOD manifest of a flat pair");
  split->add_option("--k", sa.k, "Number of folds")->capture_default_str();
  split->add_option("--seed", sa.seed, "Seed (decimal u64)")->capture_default_str();
  split->add_option("--p", sa.p, "ID class fraction per stratum")->capture_default_str();
  split->add_option("--method", sa.method, "stratified | group | random, folds one dataset");
  split->add_flag("--random-id", sa.random_id, "Simple random ID folds for a flat pair");
  split->add_option("--out", sa.out, "Output directory")->capture_default_str();

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score every round of a fold pair with one detector");
  score->add_option("--manifest", sc.manifest, "Hierarchical manifest");
  score->add_option("--features", sc.features);
  score->add_option("--logits", sc.logits);
  score->add_option("--id", sc.id);
  score->add_option("--ood", sc.ood);
  score->add_option("--id-features", sc.id_features);
  score->add_option("--id-logits", sc.id_logits);
  score->add_option("--ood-features", sc.ood_features);
  score->add_option("--ood-logits", sc.ood_logits);
  score->add_option("--folds-id", sc.folds_id)->required();
  score->add_option("--folds-ood", sc.folds_ood)->required();
  score->add_option("--detector", sc.detector, "ebo | gen | knn | mds")->required();
  score->add_option("--name", sc.name, "Detector label in output file names");
  score->add_option("--gamma", sc.gamma)->capture_default_str();
  score->add_option("--top-m", sc.top_m);
  score->add_option("--knn-k", sc.knn_k);
  score->add_option("--out", sc.out)->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Metrics from per-round score files");
  eval->add_option("--folds-id", ev.folds_id)->required();
  eval->add_option("--folds-ood", ev.folds_ood)->required();
  eval->add_option("--scores", ev.scores, "Score file pattern with {detector} and {round}")->required();
  eval->add_option("--detector", ev.detectors, "Detector names")->required();
  eval->add_option("--id-name", ev.id_name)->capture_default_str();
  eval->add_option("--ood-name", ev.ood_name)->capture_default_str();
  eval->add_option("--out", ev.out)->capture_default_str();

  RegimeArgs ta, da;
  auto* truth = app.add_subcommand("truth", "Repeated random splits (benchmark truth)");
  auto* dcv = app.add_subcommand("dcv", "Repeated dual cross-validation");
  for (auto [cmd, args] : {std::pair{truth, &ta}, std::pair{dcv, &da}}) {
    cmd->add_option("--config", args->config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", args->sets, "Override a config key: key=value");
    cmd->add_option("--out", args->out, "Output directory (overrides output_dir)");
    cmd->add_flag("--resume", args->resume, "Skip work already recorded in the ledger");
  }

  CompareArgs ca;
  auto* cmp = app.add_subcommand("compare", "Fidelity of DCV results against the benchmark truth");
  cmp->add_option("--truth", ca.truth, "Truth regime directory");
  cmp->add_option("--dcv", ca.dcv, "DCV regime directory");
  cmp->add_option("--alpha", ca.alphas, "Significance levels");
  cmp->add_option("--alpha-normality", ca.alpha_normality)->capture_default_str();
  cmp->add_flag("--welch", ca.welch, "Welch t-test instead of pooled");
  cmp->add_option("--out", ca.out, "Output directory");
  cmp->add_option("--benchmark-csv", ca.benchmark_csv, "Stored benchmark p-value matrix");
  cmp->add_option("--counts-csv", ca.counts_csv, "Per-pair counts of significant CV runs");
  cmp->add_option("--runs", ca.runs, "CV runs behind --counts-csv")->capture_default_str();
  cmp->add_option("--metric", ca.metric)->capture_default_str();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic Gaussian dataset suite and config");
  synth->add_option("--out", sy.out)->capture_default_str();
  synth->add_option("--seed", sy.seed)->capture_default_str();
  synth->add_option("--separation", sy.separations, "Mean separation of each flat pair");
  synth->add_option("--noise", sy.noise, "Detector noise levels");
  synth->add_flag("--no-hierarchical", sy.no_hier);
  synth->add_option("--dim", sy.dim)->capture_default_str();
  synth->add_option("--id-per-class", sy.id_per_class)->capture_default_str();
  synth->add_option("--ood-per-class", sy.ood_per_class)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*split) run_split(sa);
  else if (*score) run_score(sc);
  else if (*eval) run_eval(ev);
  else if (*truth) {
    const auto cfg = regime_config(ta);
    const auto out = run_benchmark_truth(cfg, {ta.resume});
    print_warnings(out.warnings, cfg.output_dir / "truth" / "warnings.log");
    std::cout << (cfg.output_dir / "truth").string() << "\n";
  } else if (*dcv) {
    const auto cfg = regime_config(da);
    const auto out = run_dcv_rood(cfg, {da.resume});
    print_warnings(out.warnings, cfg.output_dir / "dcv" / "warnings.log");
    std::cout << (cfg.output_dir / "dcv").string() << "\n";
  } else if (*cmp) run_compare(ca);
  else if (*synth) run_synth(sy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return real_main(argc, argv);
  } catch (const dcvrood::Error& e) {
    std::cerr << "error [" << dcvrood::errc_name(e.code()) << "]: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
