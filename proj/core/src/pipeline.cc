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


#include "autoeval/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "autoeval/error.h"
#include "autoeval/kmeans.h"
#include "autoeval/parallel.h"
#include "json_codec.h"

namespace autoeval {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using internal::Decimal;
using internal::ParseDecimal;

constexpr const char* kModelFormat = "autoeval.method_model";
constexpr const char* kReportFormat = "autoeval.training_report";

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw Error(ErrorCode::kInvalidArgument, "unterminated quote in CSV line");
  return fields;
}

std::string CsvHeader(const std::string& kind, const std::string& extra = "") {
  std::string line = "# autoeval " + kind + " v" + std::to_string(kCsvSchemaVersion);
  if (!extra.empty()) line += " " + extra;
  return line + "\n";
}

fs::path Resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<fs::path> PathList(const json& j, const fs::path& base) {
  std::vector<fs::path> out;
  if (j.is_string()) {
    out.push_back(Resolve(j.get<std::string>(), base));
    return out;
  }
  for (const auto& e : j) out.push_back(Resolve(e.get<std::string>(), base));
  return out;
}

std::vector<std::string> PathStrings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

bool NeedsLogits(Method m) {
  return m == Method::kConfScore || m == Method::kEntropy || m == Method::kAtc;
}

bool Contains(const std::vector<Method>& methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::string MethodFileStem(Method m) { return std::string(MethodName(m)); }

fs::path ModelPath(const RunConfig& config, Method m) {
  return config.output_dir / "models" / (MethodFileStem(m) + ".json");
}

}  // namespace

SignatureOptions SignatureFor(const RunConfig& config, const FeatureBundle& reference) {
  SignatureOptions opts;
  opts.k = config.k_clusters > 0 ? config.k_clusters : reference.num_classes;
  if (opts.k < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "k_clusters is 0 and the reference bundle has no class count");
  }
  opts.mode = config.signature_mode;
  opts.seed = config.seeds.kmeans;
  opts.eps_scale = config.eps_scale;
  return opts;
}

std::string_view OmfdSelectionName(OmfdSelection selection) {
  return selection == OmfdSelection::kValidation ? "validation" : "target";
}

OmfdSelection ParseOmfdSelection(std::string_view name) {
  if (name == "validation") return OmfdSelection::kValidation;
  if (name == "target") return OmfdSelection::kTarget;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown OMFD selection '" + std::string(name) + "'");
}

RunConfig ParseRunConfig(const std::string& json_text, const fs::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "reference_bundle", "training_bundles", "validation_bundles", "eval_bundles",
      "methods",          "regressor",        "k_clusters",         "signature_mode",
      "kcfca_features",   "drm_meta",
      "seeds",            "seed",             "tau",                "omfd_selection",
      "eps_scale",        "drm_folds",        "threads",            "output_dir"};
  RunConfig cfg;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!kKeys.count(key)) {
        throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
      }
    }
    if (j.contains("reference_bundle")) {
      cfg.reference_bundle = Resolve(j.at("reference_bundle").get<std::string>(), base_dir);
    }
    if (j.contains("training_bundles")) {
      cfg.training_bundles = PathList(j.at("training_bundles"), base_dir);
    }
    if (j.contains("validation_bundles")) {
      cfg.validation_bundles = PathList(j.at("validation_bundles"), base_dir);
    }
    if (j.contains("eval_bundles")) cfg.eval_bundles = PathList(j.at("eval_bundles"), base_dir);
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(ParseMethod(m.get<std::string>()));
    }
    cfg.regressor = j.value("regressor", cfg.regressor);
    cfg.k_clusters = j.value("k_clusters", cfg.k_clusters);
    if (j.contains("kcfca_features")) {
      const std::string f = j.at("kcfca_features").get<std::string>();
      if (f != "scalar" && f != "full") {
        throw Error(ErrorCode::kInvalidArgument, "kcfca_features must be scalar or full");
      }
      cfg.full_signature = f == "full";
    }
    if (j.contains("signature_mode")) {
      cfg.signature_mode = ParseSignatureMode(j.at("signature_mode").get<std::string>());
    }
    if (j.contains("seed")) {
      cfg.seeds.kmeans = cfg.seeds.regressor = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      cfg.seeds.kmeans = s.value("kmeans", cfg.seeds.kmeans);
      cfg.seeds.regressor = s.value("regressor", cfg.seeds.regressor);
    }
    cfg.tau = j.value("tau", cfg.tau);
    if (j.contains("omfd_selection")) {
      cfg.selection = ParseOmfdSelection(j.at("omfd_selection").get<std::string>());
    }
    cfg.eps_scale = j.value("eps_scale", cfg.eps_scale);
    cfg.drm_folds = j.value("drm_folds", cfg.drm_folds);
    if (j.contains("drm_meta")) {
      const std::string meta = j.at("drm_meta").get<std::string>();
      if (meta != "nnls" && meta != "vote") {
        throw Error(ErrorCode::kInvalidArgument, "drm_meta must be nnls or vote");
      }
      cfg.drm_meta = meta == "nnls" ? MetaMode::kNnls : MetaMode::kVote;
    }
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("output_dir")) {
      cfg.output_dir = Resolve(j.at("output_dir").get<std::string>(), base_dir);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed config: ") + e.what());
  }
  return cfg;
}

RunConfig LoadRunConfig(const fs::path& file) {
  return ParseRunConfig(ReadTextFile(file), file.parent_path());
}

std::string RunConfigToJson(const RunConfig& config) {
  std::vector<std::string> methods;
  for (Method m : config.methods) methods.emplace_back(MethodName(m));
  const json j = {
      {"reference_bundle", config.reference_bundle.string()},
      {"training_bundles", PathStrings(config.training_bundles)},
      {"validation_bundles", PathStrings(config.validation_bundles)},
      {"eval_bundles", PathStrings(config.eval_bundles)},
      {"methods", methods},
      {"regressor", config.regressor},
      {"k_clusters", config.k_clusters},
      {"kcfca_features", config.full_signature ? "full" : "scalar"},
      {"signature_mode", std::string(SignatureModeName(config.signature_mode))},
      {"seeds", {{"kmeans", config.seeds.kmeans}, {"regressor", config.seeds.regressor}}},
      {"tau", config.tau},
      {"omfd_selection", std::string(OmfdSelectionName(config.selection))},
      {"eps_scale", config.eps_scale},
      {"drm_folds", config.drm_folds},
      {"drm_meta", config.drm_meta == MetaMode::kNnls ? "nnls" : "vote"},
      {"threads", config.threads},
      {"output_dir", config.output_dir.string()}};
  return j.dump(2) + "\n";
}

void ApplySeedOverride(RunConfig& config) {
  const char* env = std::getenv("AUTOEVAL_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("AUTOEVAL_SEED is not an unsigned integer: ") + env);
  }
  config.seeds.kmeans = config.seeds.regressor = seed;
}

void ValidateRunConfig(const RunConfig& config) {
  if (config.methods.empty()) throw Error(ErrorCode::kInvalidArgument, "methods is empty");
  std::set<Method> seen(config.methods.begin(), config.methods.end());
  if (seen.size() != config.methods.size()) {
    throw Error(ErrorCode::kInvalidArgument, "methods has duplicates");
  }
  if (config.k_clusters < 0) throw Error(ErrorCode::kInvalidArgument, "k_clusters must be >= 0");
  if (!(config.tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be > 0");
  if (!(config.eps_scale >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps_scale must be >= 0");
  if (config.regressor != "drm") ParseRegressorKind(config.regressor);
  if (config.drm_folds < 2) throw Error(ErrorCode::kInvalidArgument, "drm_folds must be >= 2");
  if (config.reference_bundle.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "reference_bundle is not set");
  }
  auto must_exist = [](const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorCode::kIo, "no such path: " + p.string());
  };
  must_exist(config.reference_bundle);
  for (const auto& p : config.training_bundles) must_exist(p);
  for (const auto& p : config.validation_bundles) must_exist(p);
  for (const auto& p : config.eval_bundles) must_exist(p);
}

std::vector<fs::path> ExpandBundlePaths(const std::vector<fs::path>& entries) {
  std::vector<fs::path> out;
  for (const auto& entry : entries) {
    if (IsBundleDir(entry)) {
      out.push_back(entry);
      continue;
    }
    if (!fs::is_directory(entry)) {
      throw Error(ErrorCode::kIo, "not a bundle directory: " + entry.string());
    }
    std::vector<fs::path> children;
    for (const auto& child : fs::directory_iterator(entry)) {
      if (child.is_directory() && IsBundleDir(child.path())) children.push_back(child.path());
    }
    if (children.empty()) {
      throw Error(ErrorCode::kMissingData, "no bundles under " + entry.string());
    }
    std::sort(children.begin(), children.end());
    out.insert(out.end(), children.begin(), children.end());
  }
  return out;
}

std::vector<FeatureBundle> LoadBundles(const std::vector<fs::path>& entries, int threads) {
  const std::vector<fs::path> paths = ExpandBundlePaths(entries);
  std::vector<FeatureBundle> bundles =
      ParallelMap(paths.size(), threads, [&](std::size_t i) { return ReadBundle(paths[i]); });
  std::stable_sort(bundles.begin(), bundles.end(),
                   [](const FeatureBundle& a, const FeatureBundle& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < bundles.size(); ++i) {
    if (bundles[i].id == bundles[i - 1].id) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate bundle id '" + bundles[i].id + "'");
    }
  }
  return bundles;
}

std::optional<double> TruthOf(const FeatureBundle& bundle) {
  if (bundle.accuracy) return bundle.accuracy;
  if (bundle.logits && bundle.labels) return ArgmaxAgreement(*bundle.logits, *bundle.labels);
  return std::nullopt;
}

Featurizer::Featurizer(FeatureBundle reference, const std::vector<Method>& methods,
                       const SignatureOptions& signature, bool full_signature,
                       double eps_scale, std::optional<AtcThreshold> atc)
    : reference_(std::move(reference)),
      signature_(signature),
      full_signature_(full_signature),
      eps_scale_(eps_scale) {
  ValidateBundle(reference_);
  if (Contains(methods, Method::kKcfca)) clusters_ = ClusterReference(reference_, signature_);
  if (Contains(methods, Method::kFid)) {
    reference_gaussian_ = GaussianFit(reference_.FeaturesAsDouble(), eps_scale_);
  }
  if (Contains(methods, Method::kAtc)) atc_ = atc ? *atc : AtcFit(reference_);
}

std::vector<double> Featurizer::Features(Method method, const FeatureBundle& sample) const {
  if (NeedsLogits(method) && !sample.logits) {
    throw Error(ErrorCode::kMissingData, "bundle '" + sample.id + "' has no logits for " +
                                             std::string(MethodName(method)));
  }
  if ((method == Method::kKcfca || method == Method::kFid) &&
      sample.dim() != reference_.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bundle '" + sample.id + "' has d=" + std::to_string(sample.dim()) +
                    ", reference has d=" + std::to_string(reference_.dim()));
  }
  auto missing = [&] {
    return Error(ErrorCode::kInvalidArgument,
                 std::string(MethodName(method)) + " was not prepared for this featurizer");
  };
  switch (method) {
    case Method::kKcfca:
      if (!clusters_) throw missing();
      return KcfcaSignature(*clusters_, sample, signature_).Features(full_signature_);
    case Method::kConfScore:
      return {ConfScore(sample)};
    case Method::kEntropy:
      return {EntropyScore(sample)};
    case Method::kAtc:
      if (!atc_) throw missing();
      return {AtcPredict(*atc_, sample)};
    case Method::kFid:
      if (!reference_gaussian_) throw missing();
      return {FrechetDistance(*reference_gaussian_,
                              GaussianFit(sample.FeaturesAsDouble(), eps_scale_))};
  }
  throw missing();
}

std::vector<std::string> Featurizer::Columns(Method method) const {
  if (method != Method::kKcfca) return {std::string(MethodName(method))};
  if (!full_signature_) return {"global_fd"};
  std::vector<std::string> cols = {"global_fd", "matched_center_dist"};
  for (int c = 0; c < signature_.k; ++c) cols.push_back("cluster_fd_" + std::to_string(c));
  return cols;
}

std::vector<MethodFeatures> ComputeFeatures(const Featurizer& featurizer,
                                            const std::vector<Method>& methods,
                                            const std::vector<FeatureBundle>& bundles,
                                            int threads) {
  const auto per_bundle = ParallelMap(bundles.size(), threads, [&](std::size_t i) {
    std::vector<std::vector<double>> row;
    for (Method m : methods) row.push_back(featurizer.Features(m, bundles[i]));
    return row;
  });
  std::vector<MethodFeatures> out;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodFeatures mf;
    mf.method = methods[mi];
    mf.columns = featurizer.Columns(methods[mi]);
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      mf.rows.push_back({bundles[i].id, bundles[i].model_ref, TruthOf(bundles[i]),
                         per_bundle[i][mi]});
    }
    out.push_back(std::move(mf));
  }
  return out;
}

TrainingTable ToTrainingTable(const MethodFeatures& features) {
  std::vector<const FeatureRow*> rows;
  for (const auto& r : features.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const FeatureRow* a, const FeatureRow* b) {
    return a->bundle_id < b->bundle_id;
  });
  TrainingTable table;
  for (const FeatureRow* r : rows) {
    if (!r->accuracy) {
      throw Error(ErrorCode::kMissingData, "bundle '" + r->bundle_id + "' has no accuracy");
    }
    table.rows.push_back({r->features, *r->accuracy, r->bundle_id});
  }
  table.Validate();
  return table;
}

std::string TrainingTableCsv(const MethodFeatures& features,
                             const SignatureOptions& signature) {
  std::string extra = "method=" + std::string(MethodName(features.method));
  if (features.method == Method::kKcfca) {
    extra += " signature_mode=" + std::string(SignatureModeName(signature.mode)) +
             " k=" + std::to_string(signature.k) + " seed=" + std::to_string(signature.seed);
  }
  std::ostringstream out;
  out << CsvHeader("training_table", extra) << "bundle_id";
  for (const auto& c : features.columns) out << ',' << c;
  out << ",accuracy\n";
  const TrainingTable table = ToTrainingTable(features);
  for (const auto& row : table.rows) {
    out << CsvField(row.sample_id);
    for (double v : row.features) out << ',' << Decimal(v);
    out << ',' << Decimal(row.accuracy) << '\n';
  }
  return out.str();
}

std::vector<MethodFeatures> BuildTrainingTables(const RunConfig& config) {
  ValidateRunConfig(config);
  if (config.training_bundles.empty()) {
    throw Error(ErrorCode::kMissingData, "no training bundles");
  }
  const std::vector<FeatureBundle> training = LoadBundles(config.training_bundles, config.threads);
  FeatureBundle reference = ReadBundle(config.reference_bundle);
  const SignatureOptions signature = SignatureFor(config, reference);
  const Featurizer featurizer(std::move(reference), config.methods, signature,
                              config.full_signature, config.eps_scale);
  auto tables = ComputeFeatures(featurizer, config.methods, training, config.threads);
  for (const auto& t : tables) ToTrainingTable(t);
  return tables;
}

double EvaluateRmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "RMSE inputs differ in length");
  }
  if (pred.size() == 0) throw Error(ErrorCode::kInvalidArgument, "RMSE of nothing");
  if (!pred.allFinite() || !truth.allFinite()) throw Error(ErrorCode::kNonFinite, "RMSE input");
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

std::string MethodModelToJson(const MethodModel& model) {
  json atc = nullptr;
  if (model.atc) {
    atc = {{"threshold", Decimal(model.atc->threshold)},
           {"source_accuracy", Decimal(model.atc->source_accuracy)}};
  }
  const json j = {
      {"format", kModelFormat},
      {"version", 1},
      {"method", std::string(MethodName(model.method))},
      {"columns", model.columns},
      {"signature",
       {{"k", model.signature.k},
        {"mode", std::string(SignatureModeName(model.signature.mode))},
        {"seed", model.signature.seed},
        {"max_iter", model.signature.max_iter},
        {"tol", Decimal(model.signature.tol)},
        {"eps_scale", Decimal(model.signature.eps_scale)}}},
      {"kcfca_features", model.full_signature ? "full" : "scalar"},
      {"eps_scale", Decimal(model.eps_scale)},
      {"atc", atc},
      {"regressor", internal::RegressorToJson(model.regressor)}};
  return j.dump(1) + "\n";
}

MethodModel ParseMethodModel(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw Error(ErrorCode::kInvalidArgument, "not a method model document");
    }
    MethodModel model{.method = ParseMethod(j.at("method").get<std::string>()),
                      .columns = j.at("columns").get<std::vector<std::string>>(),
                      .signature = {},
                      .full_signature = j.at("kcfca_features").get<std::string>() == "full",
                      .eps_scale = ParseDecimal(j.at("eps_scale")),
                      .atc = std::nullopt,
                      .regressor = internal::RegressorFromJson(j.at("regressor"))};
    const json& s = j.at("signature");
    model.signature.k = s.at("k").get<int>();
    model.signature.mode = ParseSignatureMode(s.at("mode").get<std::string>());
    model.signature.seed = s.at("seed").get<std::uint64_t>();
    model.signature.max_iter = s.at("max_iter").get<int>();
    model.signature.tol = ParseDecimal(s.at("tol"));
    model.signature.eps_scale = ParseDecimal(s.at("eps_scale"));
    if (!j.at("atc").is_null()) {
      model.atc = AtcThreshold{ParseDecimal(j.at("atc").at("threshold")),
                               ParseDecimal(j.at("atc").at("source_accuracy"))};
    }
    if (static_cast<int>(model.columns.size()) != FeatureDim(model.regressor)) {
      throw Error(ErrorCode::kDimensionMismatch, "model columns do not match regressor input");
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed model: ") + e.what());
  }
}

AnyRegressor FitRegressor(const RunConfig& config, const TrainingTable& table) {
  if (config.regressor == "drm") {
    DrmOptions opts;
    opts.folds = config.drm_folds;
    opts.seed = config.seeds.regressor;
    opts.meta = config.drm_meta;
    return DrmFit(table, opts);
  }
  return FitBase(ParseRegressorKind(config.regressor), table, BaseHyper{},
                 config.seeds.regressor);
}

TrainResult Train(const RunConfig& config, const FeatureBundle& reference,
                  const std::vector<FeatureBundle>& training) {
  if (training.empty()) throw Error(ErrorCode::kMissingData, "no training bundles");
  const SignatureOptions signature = SignatureFor(config, reference);
  const Featurizer featurizer(reference, config.methods, signature, config.full_signature,
                              config.eps_scale);
  TrainResult result;
  result.tables = ComputeFeatures(featurizer, config.methods, training, config.threads);

  json methods = json::array();
  for (const MethodFeatures& mf : result.tables) {
    const TrainingTable table = ToTrainingTable(mf);
    MethodModel model{.method = mf.method,
                      .columns = mf.columns,
                      .signature = signature,
                      .full_signature = config.full_signature,
                      .eps_scale = config.eps_scale,
                      .atc = mf.method == Method::kAtc ? featurizer.atc() : std::nullopt,
                      .regressor = FitRegressor(config, table)};
    Eigen::VectorXd fitted(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      fitted(i) = Predict(model.regressor, table.rows[i].features);
    }
    json entry = {{"method", std::string(MethodName(mf.method))},
                  {"columns", mf.columns},
                  {"rows", table.rows.size()},
                  {"regressor", RegressorLabel(model.regressor)},
                  {"in_sample_rmse_pct", 100.0 * EvaluateRmse(fitted, table.Targets())}};
    if (const auto* drm = std::get_if<DrmModel>(&model.regressor)) {
      json weights = json::object();
      for (std::size_t b = 0; b < drm->bases.size(); ++b) {
        weights[std::string(RegressorKindName(drm->bases[b].kind))] = drm->weights[b];
      }
      entry["drm_weights"] = weights;
    }
    if (model.atc) entry["atc_threshold"] = model.atc->threshold;
    methods.push_back(std::move(entry));
    result.models.push_back(std::move(model));
  }

  json ref = {{"id", reference.id},
              {"n", reference.size()},
              {"d", reference.dim()},
              {"accuracy", TruthOf(reference) ? json(*TruthOf(reference)) : json(nullptr)}};
  if (const auto& clusters = featurizer.reference_clusters()) {
    const ClusterModel& cm = clusters->model;
    ref["kmeans"] = {{"k", cm.k},
                     {"seed", cm.seed},
                     {"iterations", cm.iterations_run},
                     {"converged", cm.converged},
                     {"inertia", cm.inertia}};
    ref["silhouette"] = cm.k >= 2 ? json(SilhouetteScore(clusters->features, cm.assignments))
                                  : json(nullptr);
  }
  const json report = {
      {"format", kReportFormat},
      {"version", 1},
      {"reference", ref},
      {"seeds", {{"kmeans", config.seeds.kmeans}, {"regressor", config.seeds.regressor}}},
      {"signature_mode", std::string(SignatureModeName(config.signature_mode))},
      {"k_clusters", signature.k},
      {"kcfca_features", config.full_signature ? "full" : "scalar"},
      {"eps_scale", config.eps_scale},
      {"regressor", config.regressor},
      {"drm_folds", config.drm_folds},
      {"drm_meta", config.drm_meta == MetaMode::kNnls ? "nnls" : "vote"},
      {"training_bundles", training.size()},
      {"methods", methods}};
  result.report_json = report.dump(2) + "\n";
  return result;
}

TrainResult RunTrain(const RunConfig& config) {
  ValidateRunConfig(config);
  if (config.training_bundles.empty()) {
    throw Error(ErrorCode::kMissingData, "no training bundles");
  }
  const FeatureBundle reference = ReadBundle(config.reference_bundle);
  const std::vector<FeatureBundle> training = LoadBundles(config.training_bundles, config.threads);
  TrainResult result = Train(config, reference, training);
  for (std::size_t i = 0; i < result.models.size(); ++i) {
    const Method m = result.models[i].method;
    WriteTextFile(config.output_dir / ("training_table_" + MethodFileStem(m) + ".csv"),
                  TrainingTableCsv(result.tables[i], result.models[i].signature));
    WriteTextFile(ModelPath(config, m), MethodModelToJson(result.models[i]));
  }
  WriteTextFile(config.output_dir / "training_report.json", result.report_json);
  return result;
}

std::vector<MethodModel> LoadModels(const RunConfig& config) {
  std::vector<MethodModel> models;
  for (Method m : config.methods) {
    const fs::path path = ModelPath(config, m);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::kMissingData, "no trained model at " + path.string());
    }
    MethodModel model = ParseMethodModel(ReadTextFile(path));
    if (model.method != m) {
      throw Error(ErrorCode::kInvalidArgument, path.string() + " holds a different method");
    }
    models.push_back(std::move(model));
  }
  return models;
}

std::vector<PredictionRow> PredictBundles(const std::vector<MethodModel>& models,
                                          const FeatureBundle& reference,
                                          const std::vector<FeatureBundle>& bundles,
                                          int threads) {
  std::vector<Featurizer> featurizers;
  for (const MethodModel& model : models) {
    featurizers.emplace_back(reference, std::vector<Method>{model.method}, model.signature,
                             model.full_signature, model.eps_scale, model.atc);
  }
  const auto per_bundle = ParallelMap(bundles.size(), threads, [&](std::size_t i) {
    std::vector<double> preds;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const std::vector<double> x = featurizers[m].Features(models[m].method, bundles[i]);
      if (static_cast<int>(x.size()) != FeatureDim(models[m].regressor)) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "feature width differs from the trained model for " +
                        std::string(MethodName(models[m].method)));
      }
      preds.push_back(100.0 * Predict(models[m].regressor, x));
    }
    return preds;
  });
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const std::optional<double> truth = TruthOf(bundles[i]);
    for (std::size_t m = 0; m < models.size(); ++m) {
      rows.push_back({bundles[i].id, std::string(MethodName(models[m].method)),
                      per_bundle[i][m],
                      truth ? std::optional<double>(100.0 * *truth) : std::nullopt,
                      bundles[i].model_ref});
    }
  }
  return rows;
}

namespace {

// RMSE per method in first-appearance order; methods lacking any truth are
// skipped.
std::vector<RmseRow> RmseByMethod(const std::vector<const PredictionRow*>& rows,
                                  const std::string& track) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_method;
  std::set<std::string> incomplete;
  for (const PredictionRow* r : rows) {
    if (!by_method.count(r->method)) order.push_back(r->method);
    auto& [pred, truth] = by_method[r->method];
    if (!r->truth_pct) {
      incomplete.insert(r->method);
      continue;
    }
    pred.push_back(r->pred_pct);
    truth.push_back(*r->truth_pct);
  }
  std::vector<RmseRow> out;
  for (const auto& method : order) {
    if (incomplete.count(method)) continue;
    const auto& [pred, truth] = by_method[method];
    out.push_back({track, method,
                   EvaluateRmse(Eigen::Map<const Eigen::VectorXd>(pred.data(), pred.size()),
                                Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size()))});
  }
  return out;
}

struct PredictionGrid {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  Eigen::MatrixXd values;
};

PredictionGrid ToGrid(const std::vector<PredictionRow>& rows) {
  PredictionGrid grid;
  std::map<std::string, std::size_t> method_index;
  std::map<std::string, std::size_t> dataset_index;
  for (const auto& r : rows) {
    if (r.method == kFusedMethod) continue;
    if (method_index.emplace(r.method, grid.methods.size()).second) {
      grid.methods.push_back(r.method);
    }
    if (dataset_index.emplace(r.bundle_id, grid.datasets.size()).second) {
      grid.datasets.push_back(r.bundle_id);
    }
  }
  if (grid.methods.empty()) throw Error(ErrorCode::kMissingData, "no predictions to fuse");
  grid.values.setConstant(grid.methods.size(), grid.datasets.size(),
                          std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    if (r.method == kFusedMethod) continue;
    grid.values(method_index[r.method], dataset_index[r.bundle_id]) = r.pred_pct;
  }
  for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
    for (Eigen::Index t = 0; t < grid.values.cols(); ++t) {
      if (std::isnan(grid.values(i, t))) {
        throw Error(ErrorCode::kMissingData, "method '" + grid.methods[i] +
                                                 "' has no prediction for '" +
                                                 grid.datasets[t] + "'");
      }
    }
  }
  return grid;
}

}  // namespace

void Summarize(const std::vector<PredictionRow>& rows, std::vector<RmseRow>* summary,
               std::vector<RmseRow>* by_track) {
  std::vector<const PredictionRow*> all;
  std::set<std::string> tracks;
  for (const auto& r : rows) {
    all.push_back(&r);
    tracks.insert(r.track);
  }
  if (summary) *summary = RmseByMethod(all, "");
  if (!by_track) return;
  by_track->clear();
  if (tracks.size() < 2) return;
  std::map<std::string, std::vector<double>> per_method;
  std::vector<std::string> method_order;
  for (const auto& track : tracks) {
    std::vector<const PredictionRow*> subset;
    for (const auto& r : rows) {
      if (r.track == track) subset.push_back(&r);
    }
    for (const RmseRow& row : RmseByMethod(subset, track)) {
      if (!per_method.count(row.method)) method_order.push_back(row.method);
      per_method[row.method].push_back(row.rmse_pct);
      by_track->push_back(row);
    }
  }
  for (const auto& method : method_order) {
    const auto& v = per_method[method];
    if (v.size() != tracks.size()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    by_track->push_back({"mean_of_tracks", method, sum / static_cast<double>(v.size())});
  }
}

EnsembleReport FusePredictions(const std::vector<PredictionRow>& target,
                               const std::vector<PredictionRow>* selection,
                               const OmfdOptions& options) {
  const PredictionGrid grid = ToGrid(target);
  EnsembleReport report;
  if (selection != nullptr && !selection->empty()) {
    const PredictionGrid sel = ToGrid(*selection);
    if (sel.methods != grid.methods) {
      throw Error(ErrorCode::kInvalidArgument,
                  "selection and target predictions cover different methods");
    }
    report = OmfdSelectAndFuse(sel.values, grid.values, grid.methods, options);
  } else {
    report = OmfdFuse(grid.values, grid.methods, options);
  }
  report.datasets = grid.datasets;
  return report;
}

EvalResult Evaluate(const RunConfig& config, const std::vector<MethodModel>& models,
                    const FeatureBundle& reference,
                    const std::vector<FeatureBundle>& validation,
                    const std::vector<FeatureBundle>& eval) {
  if (models.empty()) throw Error(ErrorCode::kInvalidArgument, "no models to evaluate");
  if (eval.empty()) throw Error(ErrorCode::kMissingData, "no eval bundles");
  EvalResult result;
  result.rows = PredictBundles(models, reference, eval, config.threads);
  OmfdOptions omfd;
  omfd.tau = config.tau;
  if (config.selection == OmfdSelection::kValidation && !validation.empty()) {
    const auto selection_rows = PredictBundles(models, reference, validation, config.threads);
    result.ensemble = FusePredictions(result.rows, &selection_rows, omfd);
  } else {
    result.ensemble = FusePredictions(result.rows, nullptr, omfd);
  }
  // Fused rows follow the per-method rows of the same bundle.
  std::vector<PredictionRow> rows;
  const std::size_t m = models.size();
  for (std::size_t i = 0; i < eval.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) rows.push_back(result.rows[i * m + j]);
    PredictionRow fused = result.rows[i * m];
    fused.method = kFusedMethod;
    fused.pred_pct = result.ensemble->fused(static_cast<Eigen::Index>(i));
    rows.push_back(std::move(fused));
  }
  result.rows = std::move(rows);
  Summarize(result.rows, &result.summary, &result.by_track);
  return result;
}

EvalResult RunPredict(const RunConfig& config) {
  ValidateRunConfig(config);
  if (config.eval_bundles.empty()) throw Error(ErrorCode::kMissingData, "no eval bundles");
  const std::vector<MethodModel> models = LoadModels(config);
  const FeatureBundle reference = ReadBundle(config.reference_bundle);
  const std::vector<FeatureBundle> eval = LoadBundles(config.eval_bundles, config.threads);
  std::vector<FeatureBundle> validation;
  if (config.selection == OmfdSelection::kValidation && !config.validation_bundles.empty()) {
    validation = LoadBundles(config.validation_bundles, config.threads);
  }
  EvalResult result = Evaluate(config, models, reference, validation, eval);
  WriteTextFile(config.output_dir / "predictions.csv", PredictionsCsv(result.rows));
  WriteTextFile(config.output_dir / "ensemble_report.json",
                EnsembleReportToJson(*result.ensemble));
  WriteTextFile(config.output_dir / "fused_predictions.csv", FusedCsv(*result.ensemble));
  WriteTextFile(config.output_dir / "summary.csv", SummaryCsv(result.summary));
  if (!result.by_track.empty()) {
    WriteTextFile(config.output_dir / "summary_by_track.csv", TrackSummaryCsv(result.by_track));
  }
  return result;
}

std::string PredictionsCsv(const std::vector<PredictionRow>& rows) {
  std::ostringstream out;
  out << CsvHeader("predictions") << "bundle_id,method,pred_pct,truth_pct,track\n";
  for (const auto& r : rows) {
    out << CsvField(r.bundle_id) << ',' << CsvField(r.method) << ',' << Decimal(r.pred_pct)
        << ',' << (r.truth_pct ? Decimal(*r.truth_pct) : "") << ',' << CsvField(r.track)
        << '\n';
  }
  return out.str();
}

std::vector<PredictionRow> ParsePredictionsCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<PredictionRow> rows;
  auto number = [](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') {
      throw Error(ErrorCode::kInvalidArgument, "bad number '" + s + "' in predictions CSV");
    }
    return v;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = SplitCsvLine(line);
    if (!header) {
      if (f.size() < 3 || f[0] != "bundle_id" || f[1] != "method" || f[2] != "pred_pct") {
        throw Error(ErrorCode::kInvalidArgument, "predictions CSV has an unexpected header");
      }
      header = true;
      continue;
    }
    if (f.size() < 3 || f.size() > 5) {
      throw Error(ErrorCode::kInvalidArgument, "predictions CSV row has the wrong width");
    }
    PredictionRow r{f[0], f[1], number(f[2]), std::nullopt, ""};
    if (f.size() > 3 && !f[3].empty()) r.truth_pct = number(f[3]);
    if (f.size() > 4) r.track = f[4];
    rows.push_back(std::move(r));
  }
  if (!header) throw Error(ErrorCode::kInvalidArgument, "predictions CSV has no header");
  return rows;
}

std::string SummaryCsv(const std::vector<RmseRow>& rows) {
  std::ostringstream out;
  out << CsvHeader("summary") << "method,rmse_pct\n";
  for (const auto& r : rows) out << CsvField(r.method) << ',' << Decimal(r.rmse_pct) << '\n';
  return out.str();
}

std::string TrackSummaryCsv(const std::vector<RmseRow>& rows) {
  std::ostringstream out;
  out << CsvHeader("summary_by_track") << "track,method,rmse_pct\n";
  for (const auto& r : rows) {
    out << CsvField(r.track) << ',' << CsvField(r.method) << ',' << Decimal(r.rmse_pct) << '\n';
  }
  return out.str();
}

std::string FusedCsv(const EnsembleReport& report) {
  std::ostringstream out;
  out << CsvHeader("fused_predictions") << "bundle_id,fused_accuracy_pct\n";
  for (Eigen::Index t = 0; t < report.fused.size(); ++t) {
    const std::string id = t < static_cast<Eigen::Index>(report.datasets.size())
                               ? report.datasets[t]
                               : std::to_string(t);
    out << CsvField(id) << ',' << Decimal(report.fused(t)) << '\n';
  }
  return out.str();
}

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return buf.str();
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + path.parent_path().string());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename onto " + path.string());
}

}  // namespace autoeval
