// Copyright 2026 The SynergyNet Authors. All Rights Reserved.
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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "synergy/cli.hpp"
#include "synergy/errors.hpp"

namespace synergy {
namespace fs = std::filesystem;
namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "synergy");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

std::vector<Json> ndjson(const std::string& text) {
  std::vector<Json> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(Json::parse(line));
  return rows;
}

// Shared workspace: two small datasets and a tiny run configuration.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "synergy_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    Json spec{{"image_size", 16}, {"num_classes", 3}, {"min_radius", 2}, {"max_radius", 5},
              {"count", 12},      {"seed", 1}};
    write_json_file(root_ / "train_spec.json", spec);
    spec["count"] = 6;
    spec["seed"] = 2;
    write_json_file(root_ / "val_spec.json", spec);
    ASSERT_EQ(cli({"synth", "--spec", (root_ / "train_spec.json").string(), "--out", (root_ / "train").string()}).code, 0);
    ASSERT_EQ(cli({"synth", "--spec", (root_ / "val_spec.json").string(), "--out", (root_ / "val").string()}).code, 0);
    write_json_file(root_ / "run.json", base_config());
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static Json base_config() {
    return Json{{"model", {{"num_classes", 3}, {"encoder_channels", {4, 8}}, {"dim", 8}, {"K", 8}, {"h_s", 2}, {"h_h", 2}}},
                {"optimizer", {{"lr", 0.01}, {"batch_size", 4}, {"epochs", 2}}},
                {"train_data", "train"},
                {"val_data", "val"},
                {"seed", 3}};
  }

  static fs::path write_config(const std::string& name, const Json& j) {
    write_json_file(root_ / name, j);
    return root_ / name;
  }

  static fs::path root_;
};

fs::path CliTest::root_;

TEST_F(CliTest, SynthReportsCountsAndWritesManifest) {
  auto r = cli({"synth", "--spec", (root_ / "val_spec.json").string(), "--out", (root_ / "synth_out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = ndjson(r.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["count"], 6);
  EXPECT_EQ(rows[0]["class_pixels"].size(), 3u);
  EXPECT_TRUE(fs::exists(root_ / "synth_out" / "manifest.json"));
  EXPECT_EQ(read_tree(root_ / "synth_out"), read_tree(root_ / "val"));
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"train", "--config", (root_ / "missing.json").string(), "--out", "x"}).code, 1);
  auto r = cli({"ablate", "--axis", "width", "--config", (root_ / "run.json").string(), "--out", "x"});
  EXPECT_EQ(r.code, 1);
  for (const auto& axis : kAblationAxes) EXPECT_NE(r.err.find(axis), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownKeysAreRejected) {
  Json j = base_config();
  j["model"]["dimm"] = 8;
  auto r = cli({"train", "--config", write_config("typo.json", j).string(), "--out", (root_ / "typo").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dimm"), std::string::npos) << r.err;

  Json spec{{"image_size", 16}, {"noise", 0.1}};
  write_json_file(root_ / "bad_spec.json", spec);
  r = cli({"synth", "--spec", (root_ / "bad_spec.json").string(), "--out", (root_ / "bad").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("noise"), std::string::npos) << r.err;

  j = base_config();
  j["optimizer"]["lr"] = 0.0;
  EXPECT_EQ(cli({"train", "--config", write_config("zero_lr.json", j).string(), "--out", (root_ / "z").string()}).code, 1);
  j = base_config();
  j["model"]["dim"] = "eight";
  EXPECT_EQ(cli({"train", "--config", write_config("typed.json", j).string(), "--out", (root_ / "t").string()}).code, 1);
}

TEST_F(CliTest, TrainEmitsEpochLinesAndEvalWritesReport) {
  const fs::path out = root_ / "run_a";
  auto r = cli({"train", "--config", (root_ / "run.json").string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = ndjson(r.out);
  std::size_t epochs = 0;
  for (const auto& row : rows) {
    if (!row.contains("epoch")) continue;
    ++epochs;
    for (const char* key : {"total", "seg", "quant", "codebook_perplexity", "val_dsc"}) EXPECT_TRUE(row.contains(key)) << key;
  }
  EXPECT_EQ(epochs, 2u);
  EXPECT_TRUE(fs::exists(out / "checkpoint" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "epochs.jsonl"));

  r = cli({"eval", "--checkpoint", (out / "checkpoint").string(), "--data", (root_ / "val").string(), "--report",
           (out / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json report = read_json_file(out / "report.json");
  for (const char* key : {"mean_dsc", "mean_hd95", "mean_iou", "mean_se", "mean_sp", "mean_acc", "class_dsc", "per_case"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
  EXPECT_EQ(report["cases"], 6);
  EXPECT_EQ(report["class_dsc"].size(), 3u);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(cli({"train", "--config", (root_ / "run.json").string(), "--out", (root_ / "rep1").string()}).code, 0);
  ASSERT_EQ(cli({"train", "--config", (root_ / "run.json").string(), "--out", (root_ / "rep2").string()}).code, 0);
  // Rerunning into an existing directory overwrites it with the same bytes.
  ASSERT_EQ(cli({"train", "--config", (root_ / "run.json").string(), "--out", (root_ / "rep2").string()}).code, 0);
  EXPECT_EQ(read_tree(root_ / "rep1"), read_tree(root_ / "rep2"));
}

TEST_F(CliTest, TrainingNeverLosesToTheUntrainedCheckpoint) {
  Json j = base_config();
  j["optimizer"]["epochs"] = 0;
  ASSERT_EQ(cli({"train", "--config", write_config("e0.json", j).string(), "--out", (root_ / "e0").string()}).code, 0);
  // Early epochs collapse toward background before recovering, so the run
  // must be long enough to get past that phase.
  j["optimizer"]["epochs"] = 80;
  ASSERT_EQ(cli({"train", "--config", write_config("e80.json", j).string(), "--out", (root_ / "e80").string()}).code, 0);
  for (const char* run : {"e0", "e80"}) {
    ASSERT_EQ(cli({"eval", "--checkpoint", (root_ / run / "checkpoint").string(), "--data", (root_ / "train").string(),
                   "--report", (root_ / run / "train_report.json").string()})
                  .code,
              0);
  }
  const double before = read_json_file(root_ / "e0" / "train_report.json")["mean_dsc"];
  const double after = read_json_file(root_ / "e80" / "train_report.json")["mean_dsc"];
  EXPECT_GE(after, before);
}

TEST_F(CliTest, SinglePointSweepEqualsTrainPlusEval) {
  const fs::path sweep = root_ / "sweep";
  auto r = cli({"ablate", "--axis", "K", "--values", "8", "--config", (root_ / "run.json").string(), "--out", sweep.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path manual = root_ / "manual";
  ASSERT_EQ(cli({"train", "--config", (root_ / "run.json").string(), "--out", manual.string()}).code, 0);
  ASSERT_EQ(cli({"eval", "--checkpoint", (manual / "checkpoint").string(), "--data", (root_ / "val").string(), "--report",
                 (manual / "report.json").string()})
                .code,
            0);
  EXPECT_EQ(read_tree(sweep / "K-8"), read_tree(manual));
  const Json summary = read_json_file(sweep / "ablation.json");
  ASSERT_EQ(summary["rows"].size(), 1u);
  EXPECT_EQ(summary["rows"][0]["mean_dsc"], read_json_file(manual / "report.json")["mean_dsc"]);
}

TEST_F(CliTest, FusionSweepHasTwoPopulatedRowsAndParallelMatches) {
  Json j = base_config();
  j["optimizer"]["epochs"] = 1;
  const fs::path config = write_config("fusion.json", j);
  auto a = cli({"ablate", "--axis", "fusion", "--config", config.string(), "--out", (root_ / "fa").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = cli({"ablate", "--axis", "fusion", "--config", config.string(), "--out", (root_ / "fb").string(), "--parallel"});
  ASSERT_EQ(b.code, 0) << b.err;
  const Json report = read_json_file(root_ / "fa" / "ablation.json");
  ASSERT_EQ(report["rows"].size(), 2u);
  for (const auto& row : report["rows"]) EXPECT_TRUE(row["mean_dsc"].is_number());
  EXPECT_TRUE(report.contains("comparison"));
  EXPECT_EQ(read_tree(root_ / "fa"), read_tree(root_ / "fb"));
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, HeadsAxisParsesVariantNames) {
  const RunConfig base = load_run_config(root_ / "run.json");
  const auto points = ablation_points(base, "heads", {"2s2h", "8s2h", "8s8h"});
  ASSERT_EQ(points.size(), 3u);
  EXPECT_EQ(points[1].config.model.cross_heads, 8u);
  EXPECT_EQ(points[1].config.model.refine_heads, 2u);
  EXPECT_THROW(ablation_points(base, "heads", {"8x2"}), ConfigError);
  EXPECT_THROW(ablation_points(base, "depth", {"0"}), ConfigError);
  const auto depth = ablation_points(base, "depth", {"3"});
  EXPECT_EQ(depth[0].config.model.encoder_channels, (std::vector<std::size_t>{4, 8, 16}));
}

TEST_F(CliTest, GradcheckExitCodes) {
  auto ok = cli({"gradcheck", "--instances", "4"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  const auto rows = ndjson(ok.out);
  EXPECT_GT(rows.size(), 30u);
  auto strict = cli({"gradcheck", "--instances", "2", "--tolerance", "1e-30"});
  EXPECT_EQ(strict.code, 3);
  EXPECT_EQ(cli({"gradcheck", "--eps", "0"}).code, 1);
}

TEST_F(CliTest, DivergentTrainingExitsWithTwo) {
  Json j = base_config();
  j["optimizer"]["lr"] = 1e200;
  j["optimizer"]["epochs"] = 3;
  auto r = cli({"train", "--config", write_config("diverge.json", j).string(), "--out", (root_ / "diverge").string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("non-finite"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace synergy
