// Copyright 2026 The AutoEval Authors
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


// Command-line front end: gen, table, train, predict, evaluate, fuse, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autoeval/bundle.h"
#include "autoeval/error.h"
#include "autoeval/omfd.h"
#include "autoeval/parallel.h"
#include "autoeval/pipeline.h"
#include "autoeval/synthgen.h"

namespace fs = std::filesystem;
using namespace autoeval;

namespace {

// Flags that mirror RunConfig. Only flags given on the command line
// override the config file.
struct RunFlags {
  std::string config;
  std::string reference;
  std::vector<std::string> train, validation, eval;
  std::string methods;
  std::string regressor;
  int k = 0;
  std::string signature_mode;
  std::string kcfca_features;
  std::uint64_t seed = 0;
  double tau = 0.0;
  std::string selection;
  double eps_scale = 0.0;
  int drm_folds = 0;
  std::string drm_meta;
  int threads = 0;
  std::string output_dir;

  CLI::App* app = nullptr;
  bool Given(const char* name) const { return app->count(name) > 0; }
};

void AddRunFlags(CLI::App* app, RunFlags& f) {
  f.app = app;
  app->add_option("--config", f.config, "JSON run config; flags override it")
      ->check(CLI::ExistingFile);
  app->add_option("--reference", f.reference, "Reference bundle directory");
  app->add_option("--train", f.train, "Training bundle dirs or parents of bundle dirs");
  app->add_option("--validation", f.validation, "Validation bundles for OMFD selection");
  app->add_option("--eval", f.eval, "Bundles to predict");
  app->add_option("--methods", f.methods, "Comma list: kcfca,conf_score,entropy,atc,fid");
  app->add_option("--regressor", f.regressor, "ols, knn, random_forest, kernel_ridge or drm");
  app->add_option("--k", f.k, "Clusters per bundle, 0 for the reference class count")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--signature-mode", f.signature_mode,
                  "centers_gaussian or matched_percluster");
  app->add_option("--kcfca-features", f.kcfca_features, "scalar (global_fd) or full")
      ->check(CLI::IsMember({"scalar", "full"}));
  app->add_option("--seed", f.seed, "Seed for clustering and regression");
  app->add_option("--tau", f.tau, "OMFD threshold in percentage points");
  app->add_option("--selection", f.selection, "OMFD survivor selection: validation or target");
  app->add_option("--eps-scale", f.eps_scale, "Covariance ridge scale");
  app->add_option("--drm-folds", f.drm_folds, "Out-of-fold splits for DRM");
  app->add_option("--drm-meta", f.drm_meta, "DRM meta weights: nnls or vote")
      ->check(CLI::IsMember({"nnls", "vote"}));
  app->add_option("--threads", f.threads, "Worker threads, 0 for all cores");
  app->add_option("--output-dir", f.output_dir, "Where tables, models and reports go");
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig ResolveConfig(const RunFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : LoadRunConfig(f.config);
  auto paths = [](const std::vector<std::string>& v) {
    return std::vector<fs::path>(v.begin(), v.end());
  };
  if (f.Given("--reference")) cfg.reference_bundle = f.reference;
  if (f.Given("--train")) cfg.training_bundles = paths(f.train);
  if (f.Given("--validation")) cfg.validation_bundles = paths(f.validation);
  if (f.Given("--eval")) cfg.eval_bundles = paths(f.eval);
  if (f.Given("--methods")) {
    cfg.methods.clear();
    for (const auto& m : SplitList(f.methods)) cfg.methods.push_back(ParseMethod(m));
  }
  if (f.Given("--regressor")) cfg.regressor = f.regressor;
  if (f.Given("--k")) cfg.k_clusters = f.k;
  if (f.Given("--signature-mode")) cfg.signature_mode = ParseSignatureMode(f.signature_mode);
  if (f.Given("--kcfca-features")) cfg.full_signature = f.kcfca_features == "full";
  if (f.Given("--seed")) cfg.seeds.kmeans = cfg.seeds.regressor = f.seed;
  if (f.Given("--tau")) cfg.tau = f.tau;
  if (f.Given("--selection")) cfg.selection = ParseOmfdSelection(f.selection);
  if (f.Given("--eps-scale")) cfg.eps_scale = f.eps_scale;
  if (f.Given("--drm-folds")) cfg.drm_folds = f.drm_folds;
  if (f.Given("--drm-meta")) {
    cfg.drm_meta = f.drm_meta == "nnls" ? MetaMode::kNnls : MetaMode::kVote;
  }
  if (f.Given("--threads")) cfg.threads = f.threads;
  if (f.Given("--output-dir")) cfg.output_dir = f.output_dir;
  ApplySeedOverride(cfg);
  return cfg;
}

void PrintSummary(const std::vector<RmseRow>& rows) {
  if (rows.empty()) {
    std::printf("no RMSE: some eval bundles lack ground truth\n");
    return;
  }
  std::printf("%-16s %12s\n", "method", "RMSE (pp)");
  for (const auto& r : rows) std::printf("%-16s %12.3f\n", r.method.c_str(), r.rmse_pct);
}

void PrintEnsemble(const EnsembleReport& report) {
  std::printf("OMFD tau=%g selection=%s survivors:", report.tau, report.selection.c_str());
  for (const auto& s : report.Survivors()) std::printf(" %s", s.c_str());
  std::printf("\n");
  for (const auto& r : report.removed) {
    std::printf("  removed %s (distance %.3f)\n", r.method.c_str(), r.distance);
  }
  if (report.degenerate) std::printf("  degenerate: every method exceeded tau\n");
}

int RunGen(const std::string& grid_file, const std::string& out_dir,
           const std::string& reference_dir, std::uint64_t reference_seed, int threads) {
  const ShiftGrid grid = ParseShiftGrid(ReadTextFile(grid_file));
  const SynthWorld world = MakeWorld(grid.world);
  const std::vector<GridPoint> points = ExpandGrid(world, grid);
  ParallelMap(points.size(), threads, [&](std::size_t i) {
    WriteBundle(GenShiftedBundle(world, points[i].spec, points[i].id),
                fs::path(out_dir) / points[i].id);
    return 0;
  });
  std::printf("wrote %zu bundles to %s\n", points.size(), out_dir.c_str());
  if (!reference_dir.empty()) {
    ShiftSpec spec;
    spec.n = grid.n;
    spec.seed = reference_seed;
    const FeatureBundle ref = GenShiftedBundle(world, spec, "reference");
    WriteBundle(ref, reference_dir);
    std::printf("wrote reference (accuracy %.4f) to %s\n", *ref.accuracy,
                reference_dir.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free accuracy prediction from feature-space statistics"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Write one synthetic bundle per shift-grid point");
  std::string grid_file, gen_out, gen_reference;
  std::uint64_t reference_seed = 999;
  int gen_threads = 0;
  gen->add_option("--grid", grid_file, "Shift grid JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--reference", gen_reference, "Also write an unshifted reference bundle here");
  gen->add_option("--reference-seed", reference_seed, "Seed of the reference bundle");
  gen->add_option("--threads", gen_threads, "Worker threads, 0 for all cores");

  RunFlags table_flags, train_flags, predict_flags;
  auto* table = app.add_subcommand("table", "Write per-method training tables");
  AddRunFlags(table, table_flags);
  auto* train = app.add_subcommand("train", "Fit one accuracy regressor per method");
  AddRunFlags(train, train_flags);
  auto* predict = app.add_subcommand("predict", "Predict eval bundles and fuse with OMFD");
  AddRunFlags(predict, predict_flags);

  auto* evaluate = app.add_subcommand("evaluate", "RMSE per method from a predictions CSV");
  std::string eval_predictions, eval_out;
  evaluate->add_option("--predictions", eval_predictions, "predictions.csv")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--output-dir", eval_out, "Write summary.csv here");

  auto* fuse = app.add_subcommand("fuse", "OMFD over the methods in a predictions CSV");
  std::string fuse_predictions, fuse_selection, fuse_centroid, fuse_out;
  double fuse_tau = kDefaultTau;
  fuse->add_option("--predictions", fuse_predictions, "predictions.csv to fuse")
      ->required()
      ->check(CLI::ExistingFile);
  fuse->add_option("--selection-predictions", fuse_selection,
                   "Choose survivors on these predictions instead")
      ->check(CLI::ExistingFile);
  fuse->add_option("--tau", fuse_tau, "Threshold in percentage points");
  fuse->add_option("--centroid", fuse_centroid, "Comma list replacing the median centroid");
  fuse->add_option("--output-dir", fuse_out, "Write ensemble_report.json and fused CSV here");

  auto* report = app.add_subcommand("report", "Print the summaries in an output directory");
  std::string report_dir = "autoeval_out";
  report->add_option("--output-dir", report_dir, "Directory written by train/predict");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return RunGen(grid_file, gen_out, gen_reference, reference_seed, gen_threads);

    if (*table) {
      const RunConfig cfg = ResolveConfig(table_flags);
      const auto tables = BuildTrainingTables(cfg);
      const SignatureOptions sig = SignatureFor(cfg, ReadBundle(cfg.reference_bundle));
      for (const auto& t : tables) {
        const fs::path path =
            cfg.output_dir / ("training_table_" + std::string(MethodName(t.method)) + ".csv");
        WriteTextFile(path, TrainingTableCsv(t, sig));
        std::printf("%s: %zu rows -> %s\n", std::string(MethodName(t.method)).c_str(),
                    t.rows.size(), path.c_str());
      }
      return 0;
    }

    if (*train) {
      const RunConfig cfg = ResolveConfig(train_flags);
      const TrainResult result = RunTrain(cfg);
      for (const auto& m : result.models) {
        std::printf("trained %s (%s) on %zu bundles\n", std::string(MethodName(m.method)).c_str(),
                    RegressorLabel(m.regressor).c_str(), result.tables.front().rows.size());
      }
      std::printf("models in %s\n", (cfg.output_dir / "models").c_str());
      return 0;
    }

    if (*predict) {
      const RunConfig cfg = ResolveConfig(predict_flags);
      const EvalResult result = RunPredict(cfg);
      if (result.ensemble) PrintEnsemble(*result.ensemble);
      PrintSummary(result.summary);
      return 0;
    }

    if (*evaluate) {
      const auto rows = ParsePredictionsCsv(ReadTextFile(eval_predictions));
      std::vector<RmseRow> summary, by_track;
      Summarize(rows, &summary, &by_track);
      if (!eval_out.empty()) {
        WriteTextFile(fs::path(eval_out) / "summary.csv", SummaryCsv(summary));
        if (!by_track.empty()) {
          WriteTextFile(fs::path(eval_out) / "summary_by_track.csv", TrackSummaryCsv(by_track));
        }
      }
      PrintSummary(summary);
      for (const auto& r : by_track) {
        std::printf("  [%s] %-16s %10.3f\n", r.track.c_str(), r.method.c_str(), r.rmse_pct);
      }
      return 0;
    }

    if (*fuse) {
      const auto rows = ParsePredictionsCsv(ReadTextFile(fuse_predictions));
      std::vector<PredictionRow> selection;
      if (!fuse_selection.empty()) selection = ParsePredictionsCsv(ReadTextFile(fuse_selection));
      OmfdOptions opts;
      opts.tau = fuse_tau;
      if (!fuse_centroid.empty()) {
        const auto parts = SplitList(fuse_centroid);
        Eigen::VectorXd c(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) c(i) = std::stod(parts[i]);
        opts.fixed_centroid = c;
      }
      const EnsembleReport ens =
          FusePredictions(rows, fuse_selection.empty() ? nullptr : &selection, opts);
      if (!fuse_out.empty()) {
        WriteTextFile(fs::path(fuse_out) / "ensemble_report.json", EnsembleReportToJson(ens));
        WriteTextFile(fs::path(fuse_out) / "fused_predictions.csv", FusedCsv(ens));
      }
      PrintEnsemble(ens);
      return 0;
    }

    if (*report) {
      const fs::path dir = report_dir;
      if (fs::exists(dir / "training_report.json")) {
        std::printf("training report: %s\n", (dir / "training_report.json").c_str());
      }
      const fs::path summary = dir / "summary.csv";
      if (!fs::exists(summary)) {
        std::fprintf(stderr, "no summary.csv in %s; run predict first\n", dir.c_str());
        return 1;
      }
      std::istringstream in(ReadTextFile(summary));
      std::string line;
      std::printf("%-16s %12s\n", "method", "RMSE (pp)");
      bool header = false;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
          header = true;
          continue;
        }
        const auto comma = line.rfind(',');
        std::printf("%-16s %12.3f\n", line.substr(0, comma).c_str(),
                    std::stod(line.substr(comma + 1)));
      }
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "autoeval: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "autoeval: %s\n", e.what());
    return 2;
  }
  return 0;
}
