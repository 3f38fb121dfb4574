// Copyright 2026 The lafad Authors
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

// lafad command-line tool.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error,
// 3 AUC assertion failure. Every command resolves and validates its whole
// configuration before touching any output path.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lafad/lafad.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssertion = 3;
constexpr std::uint64_t kFallbackSeed = 42;
constexpr const char* kSeedEnv = "LAFAD_SEED";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv(kSeedEnv);
  if (!env || !*env) return kFallbackSeed;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string(kSeedEnv) + " is not an unsigned integer: '" + env + "'");
  }
}

// ---------------------------------------------------------------------------
// Configuration resolution: defaults, then config file, then flags.

struct RunConfig {
  lafad::SynthConfig synth = lafad::default_config(10.0);
  lafad::ExperimentConfig exp;
};

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  // synthetic data
  std::optional<double> lambda2;
  std::optional<double> pi_mix;
  std::optional<std::size_t> n;
  // experiment
  std::optional<std::size_t> window;
  std::optional<std::size_t> repeats;
  std::optional<double> train_fraction;
  std::optional<std::size_t> bootstraps;
  std::optional<double> alpha;
  std::optional<std::size_t> samples;
  std::optional<double> epsilon;
  std::optional<std::size_t> knn_k;
  std::vector<std::string> methods;
};

const std::set<std::string> kConfigKeys = {"synth", "methods", "split",   "window", "knn",    "embedding",
                                           "bootstrap", "em",  "sampling", "workers"};

void set_all_seeds(RunConfig& rc, std::uint64_t seed) {
  rc.synth.seed = seed;
  rc.exp.split.seed = seed;
  rc.exp.pipeline.plan.seed = seed;
  rc.exp.pipeline.em.seed = seed;
  rc.exp.pipeline.sampling.seed = seed;
}

RunConfig resolve(const Overrides& o) {
  RunConfig rc;
  rc.exp = lafad::default_experiment_config(kFallbackSeed);
  set_all_seeds(rc, o.seed.value_or(default_seed()));
  try {
    if (!o.config_path.empty()) {
      const lafad::json j = lafad::load_json_file(o.config_path);
      if (!j.is_object()) throw UsageError("config " + o.config_path + " must be a JSON object");
      for (auto it = j.begin(); it != j.end(); ++it)
        if (!kConfigKeys.count(it.key())) throw UsageError("config " + o.config_path + ": unknown key '" + it.key() + "'");
      if (j.contains("synth")) j.at("synth").get_to(rc.synth);
      j.get_to(rc.exp);
      if (o.seed) set_all_seeds(rc, *o.seed);
    }
    if (o.workers) rc.exp.pipeline.workers = *o.workers;
    if (o.lambda2) rc.synth.lambda2 = *o.lambda2;
    if (o.pi_mix) rc.synth.pi_mix = *o.pi_mix;
    if (o.n) rc.synth.n = *o.n;
    if (o.window) rc.exp.window = *o.window;
    if (o.repeats) rc.exp.split.repeat_count = *o.repeats;
    if (o.train_fraction) rc.exp.split.train_fraction = *o.train_fraction;
    if (o.bootstraps) rc.exp.pipeline.plan.B = *o.bootstraps;
    if (o.alpha) rc.exp.pipeline.plan.alpha = *o.alpha;
    if (o.samples) rc.exp.pipeline.sampling.L = *o.samples;
    if (o.epsilon) rc.exp.pipeline.sampling.epsilon = *o.epsilon;
    if (o.knn_k) rc.exp.knn.k = *o.knn_k;
    if (!o.methods.empty()) rc.exp.methods = o.methods;
    if (rc.exp.pipeline.workers < 1) throw UsageError("workers must be at least 1");
    rc.synth.validate();
    rc.exp.validate();
  } catch (const lafad::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const lafad::Error& e) {
    throw UsageError(e.what());
  }
  return rc;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file; flags override its values");
  cmd->add_option("--seed", o.seed, std::string("Master seed (default: $") + kSeedEnv + " or 42)");
  cmd->add_option("--workers", o.workers, "Worker threads for the model grid (default 1)");
}

void add_synth(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--lambda2", o.lambda2, "Anomaly shock Poisson rate (lambda1 is 10)");
  cmd->add_option("--pi", o.pi_mix, "Probability that a step is normal");
  cmd->add_option("--n", o.n, "Number of points");
}

void add_experiment(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--window", o.window, "Rolling window W");
  cmd->add_option("--repeats", o.repeats, "Train/validation repeats");
  cmd->add_option("--train-fraction", o.train_fraction, "Training share of each split");
  cmd->add_option("--bootstraps", o.bootstraps, "Bootstrap count B");
  cmd->add_option("--alpha", o.alpha, "Bootstrap draw fraction");
  cmd->add_option("--samples", o.samples, "Monte-Carlo draws L per validation point");
  cmd->add_option("--epsilon", o.epsilon, "Sensitivity inflation of the sampling spread");
  cmd->add_option("--knn-k", o.knn_k, "Neighbors for the KNN baseline");
  cmd->add_option("--methods", o.methods, "Methods to evaluate (laf_ad, knn)")->delimiter(',');
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

void require_distinct(const std::vector<std::string>& paths) {
  std::set<fs::path> seen;
  for (const auto& p : paths) {
    if (p.empty() || p == "-") continue;
    const fs::path norm = fs::weakly_canonical(p);
    if (!seen.insert(norm).second) throw UsageError("path '" + p + "' is used for more than one file");
  }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  Overrides o;
  std::string out;
  std::string labels;
};

int cmd_generate(const GenerateArgs& a) {
  const RunConfig rc = resolve(a.o);
  if (a.out.empty()) throw UsageError("--out is required");
  const std::string labels = a.labels.empty() ? (fs::path(a.out).replace_extension("").string() + "_labels.csv") : a.labels;
  require_distinct({a.out, labels});

  const lafad::SynthOutput data = lafad::generate(rc.synth);
  lafad::write_nab_csv(a.out, data.series);
  lafad::write_label_windows(labels, lafad::anomaly_windows(data));
  std::size_t anomalies = 0;
  for (auto l : data.labels) anomalies += l;
  std::cout << "generated " << data.series.size() << " points, " << anomalies << " anomalies (seed " << rc.synth.seed
            << ", config " << lafad::fingerprint(lafad::json(rc.synth)) << ")\n"
            << "series: " << a.out << "\nlabels: " << labels << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  Overrides o;
  std::string input;
  std::string model;
  std::string dump_plan;
  std::string report;
};

int cmd_fit(const FitArgs& a) {
  const RunConfig rc = resolve(a.o);
  require_file(a.input, "--input");
  if (a.model.empty()) throw UsageError("--model is required");
  require_distinct({a.input, a.model, a.dump_plan, a.report});

  const lafad::TimeSeries series = lafad::load_nab_csv(a.input);
  lafad::PipelineConfig pipe = rc.exp.pipeline;
  pipe.specs = lafad::with_window(pipe.specs, rc.exp.window);
  const std::size_t w = pipe.required_window();
  const std::vector<lafad::WindowedSample> samples = w > 0 ? lafad::make_windows(series, w) : lafad::as_samples(series);

  lafad::SplitSpec split = rc.exp.split;
  split.repeat_count = 1;
  const std::size_t boundary = lafad::split_boundaries(series.size(), split).front();
  std::size_t cut = 0;
  while (cut < samples.size() && samples[cut].index < boundary) ++cut;
  const std::span<const lafad::WindowedSample> all(samples);
  const lafad::PipelineResult res = lafad::run_pipeline(all.subspan(0, cut), all.subspan(cut), pipe);

  const std::string fp = lafad::fingerprint(rc.exp);
  lafad::save_ensemble(a.model, res.ensemble, fp);
  if (!a.report.empty()) {
    std::ofstream out(a.report, std::ios::binary);
    if (!out || !(out << lafad::pipeline_report_to_json(res, all.subspan(cut)).dump(1) << '\n'))
      throw lafad::Error("cannot write " + a.report);
  }
  if (!a.dump_plan.empty()) {
    std::ofstream out(a.dump_plan, std::ios::binary);
    if (!out) throw lafad::Error("cannot write " + a.dump_plan);
    lafad::write_plan(out, lafad::draw_plan(cut, pipe.plan.B, pipe.plan.alpha, pipe.plan.seed));
  }

  std::cout << "fitted " << res.ensemble.models.size() << " models x " << (pipe.plan.B + 1) << " bootstrap columns on "
            << cut << " samples; model variance from " << (samples.size() - cut) << " held-out samples\n"
            << "config " << fp << "\n\nmodel,mu_sigma,weight\n";
  for (std::size_t m = 0; m < res.ensemble.models.size(); ++m)
    std::cout << res.ensemble.models[m].spec.label() << ',' << lafad::format_value(res.ensemble.mu_sigma[m]) << ','
              << lafad::format_value(res.ensemble.weights[m]) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string model;
  std::string input;
  std::string output = "-";
};

int cmd_score(const ScoreArgs& a) {
  require_file(a.model, "--model");
  require_file(a.input, "--input");
  require_distinct({a.model, a.input, a.output});

  // Everything that can fail on bad input happens before the output opens.
  const lafad::FittedEnsemble ensemble = lafad::load_ensemble(a.model);
  const lafad::TimeSeries series = lafad::load_nab_csv(a.input);
  const std::vector<lafad::WindowedSample> samples =
      ensemble.window > 0 ? lafad::make_windows(series, ensemble.window) : lafad::as_samples(series);

  std::ofstream file;
  if (a.output != "-") {
    file.open(a.output, std::ios::binary);
    if (!file) throw lafad::Error("cannot write " + a.output);
  }
  std::ostream& out = a.output == "-" ? std::cout : file;
  out << "timestamp,combined_score,soft_score,decision\n";
  for (const auto& s : samples) {
    const lafad::EnsembleVerdict v = ensemble.score(s);
    out << lafad::format_timestamp(s.timestamp) << ',' << lafad::format_value(v.combined_score) << ','
        << lafad::format_value(v.soft_score) << ',' << int(v.decision) << '\n';
  }
  out.flush();
  if (!out) throw lafad::Error("write failed: " + a.output);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  Overrides o;
  std::string input;
  std::string labels;
  bool synthetic = false;
  std::vector<std::string> formats{"markdown"};
  std::string report_prefix = "report";
  std::vector<std::string> assertions;
};

struct AucAssertion {
  std::string method;
  double threshold = 0.0;
};

std::vector<AucAssertion> parse_assertions(const std::vector<std::string>& raw, const lafad::ExperimentConfig& exp) {
  std::vector<AucAssertion> out;
  for (const auto& s : raw) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw UsageError("--assert-auc expects method:value, got '" + s + "'");
    AucAssertion a{s.substr(0, colon), 0.0};
    try {
      std::size_t used = 0;
      a.threshold = std::stod(s.substr(colon + 1), &used);
      if (used != s.size() - colon - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw UsageError("--assert-auc threshold is not a number in '" + s + "'");
    }
    if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw UsageError("--assert-auc threshold must lie in [0, 1]");
    if (std::find(exp.methods.begin(), exp.methods.end(), a.method) == exp.methods.end())
      throw UsageError("--assert-auc names method '" + a.method + "' which is not being evaluated");
    out.push_back(a);
  }
  return out;
}

const char* extension_of(lafad::ReportFormat f) {
  switch (f) {
    case lafad::ReportFormat::kJson: return ".json";
    case lafad::ReportFormat::kCsv: return ".csv";
    case lafad::ReportFormat::kMarkdown: return ".md";
  }
  return "";
}

int cmd_evaluate(const EvaluateArgs& a) {
  const RunConfig rc = resolve(a.o);
  if (a.synthetic == !a.input.empty()) throw UsageError("give exactly one of --input or --synthetic");
  if (!a.synthetic) {
    require_file(a.input, "--input");
    require_file(a.labels, "--labels");
  }
  std::vector<lafad::ReportFormat> formats;
  try {
    for (const auto& f : a.formats) formats.push_back(lafad::report_format_from_string(f));
  } catch (const lafad::Error& e) {
    throw UsageError(e.what());
  }
  const auto assertions = parse_assertions(a.assertions, rc.exp);
  std::vector<std::string> outputs{a.input, a.labels};
  for (auto f : formats) outputs.push_back(a.report_prefix + extension_of(f));
  require_distinct(outputs);

  lafad::TimeSeries series;
  std::string dataset;
  if (a.synthetic) {
    series = lafad::generate(rc.synth).series;
    dataset = "synthetic";
  } else {
    const lafad::TimeSeries raw = lafad::load_nab_csv(a.input);
    series = raw.with_labels(lafad::label_points(raw, lafad::load_windows_any(a.labels, a.input)));
    dataset = fs::path(a.input).stem().string();
  }

  lafad::ExperimentReport report = lafad::run_experiment(series, rc.exp, dataset);
  if (a.synthetic)
    report.config_fingerprint = lafad::fingerprint(lafad::json{{"experiment", rc.exp}, {"synth", rc.synth}});
  for (auto f : formats) lafad::emit_report(report, f, a.report_prefix + extension_of(f));
  std::cout << lafad::render_report(report, lafad::ReportFormat::kMarkdown);

  int code = kExitOk;
  for (const auto& as : assertions) {
    const auto it = std::find(report.methods.begin(), report.methods.end(), as.method);
    const double mean = report.mean[static_cast<std::size_t>(it - report.methods.begin())];
    if (mean < as.threshold) {
      std::cerr << "assertion failed: " << as.method << " mean AUC " << lafad::format_value(mean) << " < "
                << lafad::format_value(as.threshold) << '\n';
      code = kExitAssertion;
    }
  }
  return code;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  Overrides o;
  std::vector<double> ratios{1.0, 2.0, 4.0};
  std::vector<std::size_t> windows{5};
  std::string output;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  const RunConfig base = resolve(a.o);
  if (a.ratios.empty() || a.windows.empty()) throw UsageError("need at least one ratio and one window");
  std::vector<RunConfig> grid;
  for (double ratio : a.ratios)
    for (std::size_t w : a.windows) {
      RunConfig rc = base;
      rc.synth.lambda2 = ratio * rc.synth.lambda1;
      rc.exp.window = w;
      try {
        rc.synth.validate();
        rc.exp.validate();
      } catch (const lafad::Error& e) {
        throw UsageError(e.what());
      }
      grid.push_back(rc);
    }

  std::ostringstream table;
  table << "| lambda2/lambda1 | W |";
  for (const auto& m : base.exp.methods) table << ' ' << m << " mean | " << m << " var |";
  table << "\n|---|---|";
  for (std::size_t i = 0; i < base.exp.methods.size(); ++i) table << "---|---|";
  table << '\n';
  std::cout << table.str() << std::flush;
  for (const auto& rc : grid) {
    const lafad::ExperimentReport r = lafad::run_experiment(lafad::generate(rc.synth).series, rc.exp, "synthetic");
    char buf[96];
    std::snprintf(buf, sizeof buf, "| %g | %zu |", rc.synth.lambda2 / rc.synth.lambda1, rc.exp.window);
    std::string row = buf;
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
      std::snprintf(buf, sizeof buf, " %.3f | %.4f |", r.mean[m], r.variance[m]);
      row += buf;
    }
    std::cout << row << '\n' << std::flush;
    table << row << '\n';
  }
  if (!a.output.empty()) {
    std::ofstream out(a.output, std::ios::binary);
    if (!out || !(out << table.str())) throw lafad::Error("cannot write " + a.output);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lafad: label-free anomaly detection on calendar time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lafad 0.1.0");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic series and its anomaly windows");
  add_common(g, gen.o);
  add_synth(g, gen.o);
  g->add_option("-o,--out", gen.out, "Series CSV (timestamp,value)")->required();
  g->add_option("--labels", gen.labels, "Label window CSV (default: <out>_labels.csv)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the model ensemble on a series and save it");
  add_common(f, fit.o);
  add_experiment(f, fit.o);
  f->add_option("-i,--input", fit.input, "Series CSV; the leading train fraction fits, the rest sets model weights")
      ->required();
  f->add_option("-m,--model", fit.model, "Output model file (JSON)")->required();
  f->add_option("--dump-plan", fit.dump_plan, "Also write the bootstrap in-bag matrix");
  f->add_option("--report", fit.report, "Also write model variances and held-out verdicts (JSON)");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score a series with a saved model; the first W points have no score");
  s->add_option("-m,--model", score.model, "Model file from `fit`")->required();
  s->add_option("-i,--input", score.input, "Series CSV")->required();
  s->add_option("-o,--output", score.output, "Score CSV, '-' for stdout")->capture_default_str();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Repeated train/validation AUC evaluation");
  add_common(e, ev.o);
  add_synth(e, ev.o);
  add_experiment(e, ev.o);
  e->add_option("-i,--input", ev.input, "Series CSV");
  e->add_option("-l,--labels", ev.labels, "Label windows: start,end CSV or NAB combined_windows.json");
  e->add_flag("--synthetic", ev.synthetic, "Evaluate on generated data instead of --input");
  e->add_option("--format", ev.formats, "Report formats: json, csv, markdown")->delimiter(',')->capture_default_str();
  e->add_option("--report-prefix", ev.report_prefix, "Report path without extension")->capture_default_str();
  e->add_option("--assert-auc", ev.assertions, "Fail with exit code 3 unless method mean AUC >= value (method:value)");

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Synthetic sweep over lambda2/lambda1 and W");
  add_common(b, bench.o);
  add_synth(b, bench.o);
  add_experiment(b, bench.o);
  b->add_option("--ratios", bench.ratios, "lambda2/lambda1 values")->delimiter(',')->capture_default_str();
  b->add_option("--windows", bench.windows, "Window sizes")->delimiter(',')->capture_default_str();
  b->add_option("-o,--output", bench.output, "Also write the markdown table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (f->parsed()) return cmd_fit(fit);
    if (s->parsed()) return cmd_score(score);
    if (e->parsed()) return cmd_evaluate(ev);
    if (b->parsed()) return cmd_benchmark(bench);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
