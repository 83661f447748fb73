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


#ifndef AUTOEVAL_PIPELINE_H_
#define AUTOEVAL_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "autoeval/bundle.h"
#include "autoeval/omfd.h"
#include "autoeval/regress.h"
#include "autoeval/scores.h"
#include "autoeval/shift_distance.h"

namespace autoeval {

// Bumped whenever a CSV column layout changes.
inline constexpr int kCsvSchemaVersion = 1;

enum class OmfdSelection { kValidation, kTarget };
std::string_view OmfdSelectionName(OmfdSelection selection);
OmfdSelection ParseOmfdSelection(std::string_view name);

struct RunSeeds {
  std::uint64_t kmeans = 17;
  std::uint64_t regressor = 17;
};

struct RunConfig {
  std::filesystem::path reference_bundle;
  // Each entry is a bundle directory or a directory whose children are
  // bundle directories.
  std::vector<std::filesystem::path> training_bundles;
  std::vector<std::filesystem::path> validation_bundles;
  std::vector<std::filesystem::path> eval_bundles;
  std::vector<Method> methods = {Method::kKcfca};
  // A base regressor name or "drm".
  std::string regressor = "ols";
  // 0 takes the class count C of the reference bundle.
  int k_clusters = 0;
  // KCFCA regression input: global_fd alone, or the full signature vector
  // {global_fd, matched_center_dist, per_cluster_fd...}.
  bool full_signature = false;
  SignatureMode signature_mode = SignatureMode::kCentersGaussian;
  RunSeeds seeds;
  double tau = kDefaultTau;
  OmfdSelection selection = OmfdSelection::kValidation;
  double eps_scale = kDefaultEpsScale;
  int drm_folds = 5;
  MetaMode drm_meta = MetaMode::kNnls;
  int threads = 0;
  std::filesystem::path output_dir = "autoeval_out";
};

// Relative paths in the document resolve against `base_dir`.
RunConfig ParseRunConfig(const std::string& json_text,
                         const std::filesystem::path& base_dir = {});
RunConfig LoadRunConfig(const std::filesystem::path& file);
std::string RunConfigToJson(const RunConfig& config);
// Replaces every seed with AUTOEVAL_SEED when that variable is set.
void ApplySeedOverride(RunConfig& config);
// Methods non-empty, k >= 0, tau > 0 and every named path exists.
void ValidateRunConfig(const RunConfig& config);

// Bundle directories named by `entries`, each directory expanded to its
// bundle children in name order.
std::vector<std::filesystem::path> ExpandBundlePaths(
    const std::vector<std::filesystem::path>& entries);
// Reads in parallel and sorts by bundle id. Duplicate ids are an error.
std::vector<FeatureBundle> LoadBundles(const std::vector<std::filesystem::path>& entries,
                                       int threads);

// Known accuracy of a bundle, derived from logits and labels when the
// manifest does not carry it.
std::optional<double> TruthOf(const FeatureBundle& bundle);

// Turns a bundle into the regression input of one method, relative to a fixed
// reference bundle.
class Featurizer {
 public:
  // Prepares only what `methods` need: the reference clustering for kcfca,
  // its Gaussian for fid and an ATC threshold (fitted on the reference unless
  // `atc` is given).
  Featurizer(FeatureBundle reference, const std::vector<Method>& methods,
             const SignatureOptions& signature, bool full_signature = false,
             double eps_scale = kDefaultEpsScale,
             std::optional<AtcThreshold> atc = std::nullopt);

  std::vector<double> Features(Method method, const FeatureBundle& sample) const;
  std::vector<std::string> Columns(Method method) const;

  const FeatureBundle& reference() const { return reference_; }
  const SignatureOptions& signature() const { return signature_; }
  bool full_signature() const { return full_signature_; }
  double eps_scale() const { return eps_scale_; }
  const std::optional<AtcThreshold>& atc() const { return atc_; }
  // Present when kcfca was requested.
  const std::optional<ReferenceClustering>& reference_clusters() const {
    return clusters_;
  }

 private:
  FeatureBundle reference_;
  SignatureOptions signature_;
  bool full_signature_;
  double eps_scale_;
  std::optional<ReferenceClustering> clusters_;
  std::optional<GaussianStats> reference_gaussian_;
  std::optional<AtcThreshold> atc_;
};

struct FeatureRow {
  std::string bundle_id;
  std::string track;  // the bundle's model_ref
  std::optional<double> accuracy;
  std::vector<double> features;
};

struct MethodFeatures {
  Method method = Method::kKcfca;
  std::vector<std::string> columns;
  std::vector<FeatureRow> rows;  // in bundle order
};

// One MethodFeatures per method. Work is mapped over bundles in parallel.
std::vector<MethodFeatures> ComputeFeatures(const Featurizer& featurizer,
                                            const std::vector<Method>& methods,
                                            const std::vector<FeatureBundle>& bundles,
                                            int threads);

// Rows ordered by bundle id. Every row needs a known accuracy.
TrainingTable ToTrainingTable(const MethodFeatures& features);
std::string TrainingTableCsv(const MethodFeatures& features,
                             const SignatureOptions& signature);

// Signature settings of a run; k_clusters = 0 resolves to the reference's C.
SignatureOptions SignatureFor(const RunConfig& config, const FeatureBundle& reference);

// Builds the per-method training tables described by `config`.
std::vector<MethodFeatures> BuildTrainingTables(const RunConfig& config);

// Root mean squared difference, in the units of the inputs.
double EvaluateRmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// A method's fitted state as persisted in models/<method>.json.
struct MethodModel {
  Method method = Method::kKcfca;
  std::vector<std::string> columns;
  SignatureOptions signature;
  bool full_signature = false;
  double eps_scale = kDefaultEpsScale;
  std::optional<AtcThreshold> atc;
  AnyRegressor regressor;
};

std::string MethodModelToJson(const MethodModel& model);
MethodModel ParseMethodModel(const std::string& text);

AnyRegressor FitRegressor(const RunConfig& config, const TrainingTable& table);

struct TrainResult {
  std::vector<MethodModel> models;
  std::vector<MethodFeatures> tables;
  std::string report_json;
};

// Fits one model per method on the training bundles. Does not touch the disk.
TrainResult Train(const RunConfig& config, const FeatureBundle& reference,
                  const std::vector<FeatureBundle>& training);
// Loads bundles, trains, and writes training_table_<method>.csv,
// models/<method>.json and training_report.json under the output directory.
TrainResult RunTrain(const RunConfig& config);

struct PredictionRow {
  std::string bundle_id;
  std::string method;
  double pred_pct = 0.0;
  std::optional<double> truth_pct;
  std::string track;
};

struct RmseRow {
  std::string track;  // empty for the pooled row
  std::string method;
  double rmse_pct = 0.0;
};

struct EvalResult {
  std::vector<PredictionRow> rows;  // bundle order, then method order
  std::optional<EnsembleReport> ensemble;
  // Pooled RMSE per method (and "omfd" when fused); present only for
  // methods whose every row has a truth.
  std::vector<RmseRow> summary;
  // Per-track RMSE when the eval bundles span more than one track.
  std::vector<RmseRow> by_track;
};

// Name used for fused rows in prediction tables and summaries.
inline constexpr const char* kFusedMethod = "omfd";

std::vector<PredictionRow> PredictBundles(const std::vector<MethodModel>& models,
                                          const FeatureBundle& reference,
                                          const std::vector<FeatureBundle>& bundles,
                                          int threads);

// Pooled and per-track RMSE over `rows`.
void Summarize(const std::vector<PredictionRow>& rows, std::vector<RmseRow>* summary,
               std::vector<RmseRow>* by_track);

// OMFD over the methods in `target` (and `selection` rows when given). Rows
// are grouped by bundle id; every method needs a prediction for every bundle.
EnsembleReport FusePredictions(const std::vector<PredictionRow>& target,
                               const std::vector<PredictionRow>* selection,
                               const OmfdOptions& options);

EvalResult Evaluate(const RunConfig& config, const std::vector<MethodModel>& models,
                    const FeatureBundle& reference,
                    const std::vector<FeatureBundle>& validation,
                    const std::vector<FeatureBundle>& eval);
// Loads models from the output directory, predicts the eval bundles and
// writes predictions.csv, ensemble_report.json, fused_predictions.csv,
// summary.csv and (with several tracks) summary_by_track.csv.
EvalResult RunPredict(const RunConfig& config);

std::vector<MethodModel> LoadModels(const RunConfig& config);

std::string PredictionsCsv(const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> ParsePredictionsCsv(const std::string& text);
std::string SummaryCsv(const std::vector<RmseRow>& rows);
std::string TrackSummaryCsv(const std::vector<RmseRow>& rows);
std::string FusedCsv(const EnsembleReport& report);

std::string ReadTextFile(const std::filesystem::path& path);
// Writes via a sibling temporary file and a rename.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace autoeval

#endif  // AUTOEVAL_PIPELINE_H_
