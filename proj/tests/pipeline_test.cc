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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "autoeval/bundle.h"
#include "autoeval/synthgen.h"
#include "test_util.h"

namespace autoeval {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

constexpr Method kAllMethods[] = {Method::kKcfca, Method::kConfScore, Method::kEntropy,
                                  Method::kAtc, Method::kFid};

// A small synthetic world written to disk once for the whole suite.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    world_ = new SynthWorld(GenWorld(4, 6, 3.0, 11));
    ShiftSpec ref_spec;
    ref_spec.n = 300;
    ref_spec.seed = 999;
    reference_ = new FeatureBundle(GenShiftedBundle(*world_, ref_spec, "reference"));
    WriteBundle(*reference_, dir_->path() / "reference");
    WriteSet("train", 24, 100, "model_a");
    WriteSet("valid", 6, 200, "model_a");
    WriteSet("eval", 6, 300, "model_a");
  }

  static void TearDownTestSuite() {
    delete reference_;
    delete world_;
    delete dir_;
  }

  static void WriteSet(const std::string& name, int count, std::uint64_t seed_base,
                       const std::string& track) {
    for (int i = 0; i < count; ++i) {
      ShiftSpec spec;
      spec.n = 150;
      spec.seed = seed_base + static_cast<std::uint64_t>(i);
      spec.noise_sigma = 0.15 * (i % 6);
      spec.mean_shift = 0.3 * (i % 4) * RandomDirection(6, spec.seed);
      const std::string id = name + "_" + std::to_string(100 + i);
      FeatureBundle b = GenShiftedBundle(*world_, spec, id);
      b.model_ref = track;
      WriteBundle(b, dir_->path() / name / id);
    }
  }

  RunConfig Config(const std::string& out, std::vector<Method> methods = {
                                               kAllMethods, kAllMethods + 5}) const {
    RunConfig cfg;
    cfg.reference_bundle = dir_->path() / "reference";
    cfg.training_bundles = {dir_->path() / "train"};
    cfg.validation_bundles = {dir_->path() / "valid"};
    cfg.eval_bundles = {dir_->path() / "eval"};
    cfg.methods = std::move(methods);
    cfg.output_dir = dir_->path() / out;
    return cfg;
  }

  static TempDir* dir_;
  static SynthWorld* world_;
  static FeatureBundle* reference_;
};

TempDir* PipelineTest::dir_ = nullptr;
SynthWorld* PipelineTest::world_ = nullptr;
FeatureBundle* PipelineTest::reference_ = nullptr;

TEST(RmseTest, Examples) {
  EXPECT_EQ(EvaluateRmse(Eigen::Vector2d(70, 80), Eigen::Vector2d(70, 80)), 0.0);
  EXPECT_DOUBLE_EQ(EvaluateRmse(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)), 2.0);
  const Eigen::VectorXd truth = 60.0 + 10.0 * testing::RandomMatrix(9, 1, 1).col(0).array();
  EXPECT_NEAR(EvaluateRmse((truth.array() - 2.5).matrix(), truth), 2.5, 1e-12);
}

TEST(RmseTest, SymmetricAndScaleCovariant) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::VectorXd p = testing::RandomMatrix(7, 1, seed).col(0);
    const Eigen::VectorXd t = testing::RandomMatrix(7, 1, seed + 50).col(0);
    const double base = EvaluateRmse(p, t);
    EXPECT_NEAR(EvaluateRmse(t, p), base, 1e-15);
    EXPECT_NEAR(EvaluateRmse((2 * t - p).eval(), t), base, 1e-12);
    EXPECT_NEAR(EvaluateRmse((3.5 * p).eval(), (3.5 * t).eval()), 3.5 * base, 1e-12);
  }
}

TEST(RmseTest, RejectsBadInput) {
  EXPECT_AUTOEVAL_ERROR(EvaluateRmse(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)),
                        ErrorCode::kDimensionMismatch);
  EXPECT_AUTOEVAL_ERROR(EvaluateRmse(Eigen::VectorXd(), Eigen::VectorXd()),
                        ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(EvaluateRmse(Eigen::Vector2d(1, NAN), Eigen::Vector2d(1, 2)),
                        ErrorCode::kNonFinite);
}

TEST_F(PipelineTest, ThreeBundlesGiveThreeSortedRows) {
  TempDir local;
  for (const char* id : {"c", "a", "b"}) {
    ShiftSpec spec;
    spec.n = 80;
    spec.seed = static_cast<std::uint64_t>(id[0]);
    WriteBundle(GenShiftedBundle(*world_, spec, id), local / id);
  }
  RunConfig cfg = Config("unused", {Method::kKcfca, Method::kConfScore});
  cfg.training_bundles = {local.path()};
  const std::vector<MethodFeatures> tables = BuildTrainingTables(cfg);
  ASSERT_EQ(tables.size(), 2u);
  for (const MethodFeatures& t : tables) {
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0].bundle_id, "a");
    EXPECT_EQ(t.rows[1].bundle_id, "b");
    EXPECT_EQ(t.rows[2].bundle_id, "c");
    EXPECT_EQ(ToTrainingTable(t).rows.size(), 3u);
  }
}

TEST_F(PipelineTest, ReferenceAsTrainingBundleGivesAZeroRow) {
  RunConfig cfg = Config("unused", {Method::kKcfca, Method::kFid});
  cfg.training_bundles = {dir_->path() / "reference"};
  for (const MethodFeatures& t : BuildTrainingTables(cfg)) {
    ASSERT_EQ(t.rows.size(), 1u);
    for (double v : t.rows[0].features) EXPECT_LT(std::abs(v), 1e-6);
    EXPECT_EQ(t.rows[0].accuracy, reference_->accuracy);
  }
}

TEST_F(PipelineTest, TableCsvHasVersionedHeader) {
  RunConfig cfg = Config("unused", {Method::kKcfca});
  cfg.full_signature = true;
  const std::vector<MethodFeatures> tables = BuildTrainingTables(cfg);
  ASSERT_EQ(tables[0].columns.size(), 6u);  // global, center, 4 clusters
  const std::string csv = TrainingTableCsv(tables[0], SignatureFor(cfg, *reference_));
  EXPECT_EQ(csv.rfind("# autoeval training_table v1 method=kcfca", 0), 0u);
  EXPECT_NE(csv.find("\nbundle_id,global_fd,matched_center_dist,cluster_fd_0,"),
            std::string::npos);
}

TEST_F(PipelineTest, MissingAccuracyIsAnError) {
  TempDir local;
  FeatureBundle bare;
  bare.id = "bare";
  bare.features = reference_->features;
  WriteBundle(bare, local / "bare");
  RunConfig cfg = Config("unused", {Method::kKcfca});
  cfg.training_bundles = {local.path()};
  EXPECT_AUTOEVAL_ERROR(BuildTrainingTables(cfg), ErrorCode::kMissingData);
  MethodFeatures features;
  features.rows.push_back({"bare", "", std::nullopt, {0.0}});
  EXPECT_AUTOEVAL_ERROR(ToTrainingTable(features), ErrorCode::kMissingData);
}

TEST_F(PipelineTest, EmptyTrainingListIsAnError) {
  RunConfig cfg = Config("empty");
  cfg.training_bundles.clear();
  try {
    RunTrain(cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no training bundles"), std::string::npos);
  }
}

TEST_F(PipelineTest, TrainingIsBitReproducible) {
  for (const std::string regressor : {"ols", "drm"}) {
    RunConfig a = Config("rep_a_" + regressor);
    RunConfig b = Config("rep_b_" + regressor);
    a.regressor = b.regressor = regressor;
    RunTrain(a);
    RunTrain(b);
    for (Method m : kAllMethods) {
      const fs::path rel = fs::path("models") / (std::string(MethodName(m)) + ".json");
      EXPECT_EQ(ReadTextFile(a.output_dir / rel), ReadTextFile(b.output_dir / rel))
          << regressor << " " << MethodName(m);
      const std::string table = "training_table_" + std::string(MethodName(m)) + ".csv";
      EXPECT_EQ(ReadTextFile(a.output_dir / table), ReadTextFile(b.output_dir / table));
    }
    EXPECT_TRUE(fs::exists(a.output_dir / "training_report.json"));
  }
}

TEST_F(PipelineTest, ModelFilesRoundTrip) {
  const RunConfig cfg = Config("roundtrip");
  const TrainResult trained = RunTrain(cfg);
  const std::vector<MethodModel> loaded = LoadModels(cfg);
  ASSERT_EQ(loaded.size(), trained.models.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(MethodModelToJson(loaded[i]), MethodModelToJson(trained.models[i]));
  }
}

TEST_F(PipelineTest, PredictRerunIsBitExact) {
  const RunConfig cfg = Config("predict");
  RunTrain(cfg);
  RunPredict(cfg);
  std::vector<std::string> first;
  const std::vector<std::string> files = {"predictions.csv", "ensemble_report.json",
                                          "fused_predictions.csv", "summary.csv"};
  for (const auto& f : files) first.push_back(ReadTextFile(cfg.output_dir / f));
  const EvalResult again = RunPredict(cfg);
  for (std::size_t i = 0; i < files.size(); ++i) {
    EXPECT_EQ(ReadTextFile(cfg.output_dir / files[i]), first[i]) << files[i];
  }
  // 6 bundles x (5 methods + fused), with a pooled RMSE for each.
  EXPECT_EQ(again.rows.size(), 36u);
  EXPECT_EQ(again.summary.size(), 6u);
  EXPECT_EQ(again.ensemble->selection, "validation");
  EXPECT_TRUE(again.by_track.empty());
}

TEST_F(PipelineTest, SingleMethodFusesToItself) {
  const RunConfig cfg = Config("single", {Method::kConfScore});
  const TrainResult trained = Train(cfg, *reference_, LoadBundles(cfg.training_bundles, 1));
  const std::vector<FeatureBundle> eval = LoadBundles(cfg.eval_bundles, 1);
  const EvalResult r = Evaluate(cfg, trained.models, *reference_, {}, eval);
  ASSERT_EQ(r.rows.size(), 2 * eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    EXPECT_EQ(r.rows[2 * i + 1].method, kFusedMethod);
    EXPECT_EQ(r.rows[2 * i + 1].pred_pct, r.rows[2 * i].pred_pct);
  }
  EXPECT_EQ(r.ensemble->selection, "target");
}

TEST_F(PipelineTest, ReferenceAsEvalBundleMatchesADirectPredict) {
  const RunConfig cfg = Config("self", {Method::kKcfca});
  const TrainResult trained = Train(cfg, *reference_, LoadBundles(cfg.training_bundles, 1));
  const std::vector<PredictionRow> rows =
      PredictBundles(trained.models, *reference_, {*reference_}, 1);
  ASSERT_EQ(rows.size(), 1u);
  const double direct = 100.0 * Predict(trained.models[0].regressor, std::vector<double>{0.0});
  EXPECT_NEAR(rows[0].pred_pct, direct, 1e-6);
  EXPECT_NEAR(*rows[0].truth_pct, 100.0 * *reference_->accuracy, 1e-12);
}

TEST_F(PipelineTest, PerTrackSummaries) {
  std::vector<PredictionRow> rows;
  for (int i = 0; i < 4; ++i) {
    const std::string track = i < 2 ? "A" : "B";
    rows.push_back({"b" + std::to_string(i), "kcfca", 80.0 + i, 80.0, track});
  }
  std::vector<RmseRow> summary, by_track;
  Summarize(rows, &summary, &by_track);
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_NEAR(summary[0].rmse_pct, std::sqrt((0 + 1 + 4 + 9) / 4.0), 1e-12);
  ASSERT_EQ(by_track.size(), 3u);
  EXPECT_EQ(by_track[0].track, "A");
  EXPECT_NEAR(by_track[0].rmse_pct, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(by_track[1].rmse_pct, std::sqrt(6.5), 1e-12);
  EXPECT_EQ(by_track[2].track, "mean_of_tracks");
  EXPECT_NEAR(by_track[2].rmse_pct, (std::sqrt(0.5) + std::sqrt(6.5)) / 2, 1e-12);
}

TEST(SummaryTest, NoRmseWithoutEveryTruth) {
  std::vector<PredictionRow> rows = {{"a", "fid", 70.0, 71.0, ""},
                                     {"b", "fid", 60.0, std::nullopt, ""}};
  std::vector<RmseRow> summary;
  Summarize(rows, &summary, nullptr);
  EXPECT_TRUE(summary.empty());
}

TEST(CsvTest, PredictionsRoundTrip) {
  const std::vector<PredictionRow> rows = {{"a", "kcfca", 0.1 + 0.2, 71.25, "t1"},
                                           {"b,c", "omfd", 1.0 / 3.0, std::nullopt, ""}};
  const std::string csv = PredictionsCsv(rows);
  EXPECT_EQ(csv.rfind("# autoeval predictions v1", 0), 0u);
  const std::vector<PredictionRow> back = ParsePredictionsCsv(csv);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].bundle_id, rows[i].bundle_id);
    EXPECT_EQ(back[i].method, rows[i].method);
    EXPECT_EQ(back[i].pred_pct, rows[i].pred_pct);
    EXPECT_EQ(back[i].truth_pct, rows[i].truth_pct);
    EXPECT_EQ(back[i].track, rows[i].track);
  }
  EXPECT_ANY_THROW(ParsePredictionsCsv("bundle_id,method\nx,y\n"));
}

TEST(FuseTest, MissingEntriesAreErrors) {
  const std::vector<PredictionRow> rows = {{"a", "m1", 70, std::nullopt, ""},
                                           {"a", "m2", 72, std::nullopt, ""},
                                           {"b", "m1", 60, std::nullopt, ""}};
  EXPECT_ANY_THROW(FusePredictions(rows, nullptr, {}));
}

TEST(ConfigTest, ParsesResolvesAndRoundTrips) {
  const RunConfig cfg = ParseRunConfig(R"({
    "reference_bundle": "ref", "training_bundles": ["train"], "eval_bundles": ["/abs/eval"],
    "methods": ["kcfca", "atc"], "regressor": "drm", "k_clusters": 8,
    "signature_mode": "matched_percluster", "kcfca_features": "full",
    "seeds": {"kmeans": 3, "regressor": 4}, "tau": 7.5, "omfd_selection": "target",
    "drm_folds": 4, "drm_meta": "vote", "threads": 2, "output_dir": "out"})",
                                       "/base");
  EXPECT_EQ(cfg.reference_bundle, fs::path("/base/ref"));
  EXPECT_EQ(cfg.training_bundles[0], fs::path("/base/train"));
  EXPECT_EQ(cfg.eval_bundles[0], fs::path("/abs/eval"));
  EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::kKcfca, Method::kAtc}));
  EXPECT_EQ(cfg.regressor, "drm");
  EXPECT_EQ(cfg.k_clusters, 8);
  EXPECT_EQ(cfg.signature_mode, SignatureMode::kMatchedPerCluster);
  EXPECT_TRUE(cfg.full_signature);
  EXPECT_EQ(cfg.seeds.kmeans, 3u);
  EXPECT_EQ(cfg.seeds.regressor, 4u);
  EXPECT_EQ(cfg.tau, 7.5);
  EXPECT_EQ(cfg.selection, OmfdSelection::kTarget);
  EXPECT_EQ(cfg.drm_folds, 4);
  EXPECT_EQ(cfg.drm_meta, MetaMode::kVote);
  EXPECT_EQ(cfg.output_dir, fs::path("/base/out"));
  EXPECT_EQ(RunConfigToJson(ParseRunConfig(RunConfigToJson(cfg))), RunConfigToJson(cfg));
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  EXPECT_AUTOEVAL_ERROR(ParseRunConfig(R"({"referenec_bundle": "x"})"),
                        ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(ParseRunConfig(R"({"methods": ["avg"]})"),
                        ErrorCode::kInvalidArgument);
  EXPECT_AUTOEVAL_ERROR(ParseRunConfig("[1, 2]"), ErrorCode::kInvalidArgument);
  TempDir dir;
  RunConfig cfg;
  cfg.reference_bundle = dir.path();
  EXPECT_NO_THROW(ValidateRunConfig(cfg));
  cfg.tau = 0.0;
  EXPECT_AUTOEVAL_ERROR(ValidateRunConfig(cfg), ErrorCode::kInvalidArgument);
  cfg.tau = 10.0;
  cfg.methods.clear();
  EXPECT_AUTOEVAL_ERROR(ValidateRunConfig(cfg), ErrorCode::kInvalidArgument);
  cfg.methods = {Method::kFid, Method::kFid};
  EXPECT_AUTOEVAL_ERROR(ValidateRunConfig(cfg), ErrorCode::kInvalidArgument);
  cfg.methods = {Method::kFid};
  cfg.regressor = "svm";
  EXPECT_AUTOEVAL_ERROR(ValidateRunConfig(cfg), ErrorCode::kInvalidArgument);
  cfg.regressor = "ols";
  cfg.training_bundles = {dir / "missing"};
  EXPECT_ANY_THROW(ValidateRunConfig(cfg));
}

TEST(ConfigTest, SeedOverrideFromEnvironment) {
  RunConfig cfg;
  ::setenv("AUTOEVAL_SEED", "1234", 1);
  ApplySeedOverride(cfg);
  EXPECT_EQ(cfg.seeds.kmeans, 1234u);
  EXPECT_EQ(cfg.seeds.regressor, 1234u);
  ::setenv("AUTOEVAL_SEED", "abc", 1);
  EXPECT_AUTOEVAL_ERROR(ApplySeedOverride(cfg), ErrorCode::kInvalidArgument);
  ::unsetenv("AUTOEVAL_SEED");
  cfg.seeds.kmeans = 5;
  ApplySeedOverride(cfg);
  EXPECT_EQ(cfg.seeds.kmeans, 5u);
}

TEST_F(PipelineTest, SeedChangesTheKcfcaModel) {
  RunConfig a = Config("seed_a", {Method::kKcfca});
  RunConfig b = Config("seed_b", {Method::kKcfca});
  b.seeds.kmeans = 18;
  const std::vector<FeatureBundle> training = LoadBundles(a.training_bundles, 1);
  EXPECT_NE(MethodModelToJson(Train(a, *reference_, training).models[0]),
            MethodModelToJson(Train(b, *reference_, training).models[0]));
}

TEST(BundlePathsTest, ExpandsParentsAndRejectsDuplicates) {
  TempDir dir;
  const SynthWorld w = GenWorld(3, 3, 2.0, 1);
  ShiftSpec spec;
  spec.n = 10;
  WriteBundle(GenShiftedBundle(w, spec, "x"), dir / "set" / "b2");
  WriteBundle(GenShiftedBundle(w, spec, "y"), dir / "set" / "b1");
  const std::vector<fs::path> paths = ExpandBundlePaths({dir / "set"});
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].filename(), "b1");
  EXPECT_EQ(LoadBundles({dir / "set"}, 2)[0].id, "x");
  WriteBundle(GenShiftedBundle(w, spec, "x"), dir / "dup");
  EXPECT_ANY_THROW(LoadBundles({dir / "set", dir / "dup"}, 1));
}

}  // namespace
}  // namespace autoeval
