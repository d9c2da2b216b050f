// End-to-end tests of the command-line tool; the binary path arrives via
// the STATECNN_BIN environment variable set by CMake.

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "testutil.hpp"

using nlohmann::json;

namespace {

struct CmdResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

std::string binary() {
  const char* bin = std::getenv("STATECNN_BIN");
  EXPECT_NE(bin, nullptr) << "STATECNN_BIN not set";
  return bin ? bin : "";
}

CmdResult run_cli(const std::string& args) {
  CmdResult r;
  std::string cmd = binary() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, n);
  int status = pclose(pipe);
  r.code = WEXITSTATUS(status);
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Lines carrying per-epoch metrics; paths and timing lines excluded.
std::vector<std::string> metric_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("stage ", 0) == 0) lines.push_back(line);
  return lines;
}

json tiny_train_config(const std::string& root, const std::string& out_dir) {
  return {
      {"dataset", {{"root", root}, {"image_side", 12}}},
      {"augment",
       {{"rotation_max_deg", 10.0}, {"zoom_range", 0.05}, {"width_shift", 0.05},
        {"height_shift", 0.05}}},
      {"model",
       {{"classes", 3},
        {"dropout", 0.0},
        {"backbone", {{"kind", "tiny_trainable"}, {"units", 3}, {"channels", 4}}}}},
      {"stage1", {{"epochs", 2}}},
      {"stage2", {{"epochs", 2}, {"unfreeze_top_k", 2}}},
      {"batch_size", 4},
      {"seeds", {{"master", 7}}},
      {"output_dir", out_dir},
  };
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream(path) << j.dump(2) << "\n";
}

}  // namespace

TEST(CliPrepare, WritesManifestAndCounts) {
  testutil::TempDir dir("cli_prep");
  testutil::write_synthetic_tree(dir.path() / "data", 3, 5, 12, 3);

  auto r = run_cli("prepare --data " + (dir.path() / "data").string() + " --out " +
                   (dir.path() / "out").string() + " --seed 5");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "split.json"));
  EXPECT_NE(r.output.find("class_0"), std::string::npos);
  EXPECT_NE(r.output.find("total"), std::string::npos);

  // 5 per class, ratio 0.8 -> 4 train / 1 val.
  EXPECT_NE(r.output.find("4       1"), std::string::npos) << r.output;

  auto first = slurp(dir.path() / "out" / "split.json");
  auto r2 = run_cli("prepare --data " + (dir.path() / "data").string() + " --out " +
                    (dir.path() / "out2").string() + " --seed 5");
  EXPECT_EQ(r2.code, 0);
  EXPECT_EQ(first, slurp(dir.path() / "out2" / "split.json"));
}

TEST(CliPrepare, MissingRootExitsTwo) {
  testutil::TempDir dir("cli_prep_missing");
  auto r = run_cli("prepare --data " + (dir.path() / "nope").string() + " --out " +
                   (dir.path() / "out").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("error"), std::string::npos);
}

TEST(CliTrain, TwoStageRunThenEvaluateAndPredictAgree) {
  testutil::TempDir dir("cli_train");
  testutil::write_synthetic_tree(dir.path() / "data", 3, 5, 12, 9);
  auto out_dir = (dir.path() / "run").string();
  auto cfg_path = dir.path() / "cfg.json";
  write_json(cfg_path, tiny_train_config((dir.path() / "data").string(), out_dir));

  auto r = run_cli("train --config " + cfg_path.string() + " --stage all");
  ASSERT_EQ(r.code, 0) << r.output;

  // Per-epoch checkpoints for both stages.
  for (const char* name : {"stage1_epoch001.ckpt", "stage1_epoch002.ckpt",
                           "stage2_epoch001.ckpt", "stage2_epoch002.ckpt"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out_dir) / name)) << name;

  // metrics.csv has a header plus one row per epoch of each stage.
  std::ifstream csv(std::filesystem::path(out_dir) / "metrics.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);

  EXPECT_EQ(metric_lines(r.output).size(), 4u);
  EXPECT_NE(r.output.find("selected: "), std::string::npos);

  // The selected stage-2 checkpoint drives evaluate and predict.
  std::string selected;
  {
    std::istringstream in(r.output);
    while (std::getline(in, line))
      if (line.rfind("selected: ", 0) == 0)
        selected = line.substr(10, line.find(" (") - 10);
  }
  ASSERT_FALSE(selected.empty());

  auto eval = run_cli("evaluate --checkpoint " + selected + " --data " +
                      (std::filesystem::path(out_dir) / "split.json").string() +
                      " --json " + (dir.path() / "eval.json").string());
  ASSERT_EQ(eval.code, 0) << eval.output;
  EXPECT_NE(eval.output.find("confusion matrix"), std::string::npos);

  std::ifstream ej(dir.path() / "eval.json");
  json eval_json;
  ej >> eval_json;
  EXPECT_EQ(eval_json.at("classes").size(), 3u);
  double accuracy = eval_json.at("accuracy").get<double>();

  // Majority tally over the validation images must reproduce the
  // evaluate accuracy.
  auto manifest_text = slurp(std::filesystem::path(out_dir) / "split.json");
  json manifest = json::parse(manifest_text);
  int correct = 0, total = 0;
  for (const auto& rel : manifest.at("val")) {
    std::string rel_path = rel.get<std::string>();
    std::string truth = rel_path.substr(0, rel_path.find('/'));
    auto pred = run_cli("predict --checkpoint " + selected + " --image " +
                        (dir.path() / "data" / rel_path).string());
    ASSERT_EQ(pred.code, 0) << pred.output;
    auto pos = pred.output.find("prediction: ");
    ASSERT_NE(pos, std::string::npos);
    std::string name = pred.output.substr(pos + 12);
    name = name.substr(0, name.find(' '));
    correct += name == truth;
    ++total;
  }
  EXPECT_NEAR(accuracy, static_cast<double>(correct) / total, 1e-9);
}

TEST(CliTrain, DeterministicRerun) {
  testutil::TempDir dir("cli_det");
  testutil::write_synthetic_tree(dir.path() / "data", 3, 4, 12, 2);

  auto run_once = [&](const std::string& tag) {
    auto out_dir = (dir.path() / tag).string();
    auto cfg_path = dir.path() / (tag + ".json");
    write_json(cfg_path, tiny_train_config((dir.path() / "data").string(), out_dir));
    return run_cli("train --config " + cfg_path.string() + " --stage all");
  };
  auto a = run_once("a");
  auto b = run_once("b");
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(b.code, 0) << b.output;
  EXPECT_EQ(metric_lines(a.output), metric_lines(b.output));
  EXPECT_EQ(slurp(dir.path() / "a" / "stage2_epoch002.ckpt"),
            slurp(dir.path() / "b" / "stage2_epoch002.ckpt"));
  EXPECT_EQ(slurp(dir.path() / "a" / "metrics.csv"), slurp(dir.path() / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir.path() / "a" / "split.json"), slurp(dir.path() / "b" / "split.json"));
}

TEST(CliTrain, StageTwoWithoutStageOneExitsThree) {
  testutil::TempDir dir("cli_stage2");
  testutil::write_synthetic_tree(dir.path() / "data", 3, 4, 12, 2);
  auto cfg_path = dir.path() / "cfg.json";
  write_json(cfg_path,
             tiny_train_config((dir.path() / "data").string(), (dir.path() / "run").string()));
  auto r = run_cli("train --config " + cfg_path.string() + " --stage 2");
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST(CliTrain, InvalidConfigListsOffendingKeys) {
  testutil::TempDir dir("cli_badcfg");
  auto cfg_path = dir.path() / "bad.json";
  std::ofstream(cfg_path) << R"({"dataset": {"rooot": "x"}, "model": {"classes": 1}})";
  auto r = run_cli("train --config " + cfg_path.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("dataset.rooot"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("model.classes"), std::string::npos) << r.output;
}

TEST(CliPredict, DeterministicAndNormalized) {
  testutil::TempDir dir("cli_pred");
  testutil::write_synthetic_tree(dir.path() / "data", 3, 3, 12, 4);
  auto out_dir = (dir.path() / "run").string();
  auto cfg_path = dir.path() / "cfg.json";
  auto cfg = tiny_train_config((dir.path() / "data").string(), out_dir);
  cfg["stage1"]["epochs"] = 1;
  cfg["stage2"]["epochs"] = 0;
  write_json(cfg_path, cfg);
  ASSERT_EQ(run_cli("train --config " + cfg_path.string() + " --stage 1").code, 0);

  std::string ckpt = (std::filesystem::path(out_dir) / "stage1_epoch001.ckpt").string();
  std::string image = (dir.path() / "data" / "class_1" / "img_0.png").string();
  auto p1 = run_cli("predict --checkpoint " + ckpt + " --image " + image);
  auto p2 = run_cli("predict --checkpoint " + ckpt + " --image " + image);
  ASSERT_EQ(p1.code, 0) << p1.output;
  EXPECT_EQ(p1.output, p2.output);

  // Probabilities parse, sum to ~1, and arrive sorted descending.
  std::istringstream in(p1.output);
  std::string line;
  std::vector<double> probs;
  while (std::getline(in, line)) {
    if (line.rfind("  class_", 0) != 0) continue;
    std::istringstream ls(line);
    std::string name;
    double p;
    ls >> name >> p;
    probs.push_back(p);
  }
  ASSERT_EQ(probs.size(), 3u);
  EXPECT_TRUE(std::is_sorted(probs.rbegin(), probs.rend()));
  double total = probs[0] + probs[1] + probs[2];
  EXPECT_NEAR(total, 1.0, 1e-4);

  auto bad = run_cli("predict --checkpoint " + ckpt + " --image " +
                     (dir.path() / "cfg.json").string());
  EXPECT_EQ(bad.code, 2);
}

TEST(CliInspect, PrintsReferenceSummary) {
  testutil::TempDir dir("cli_inspect");
  auto cfg_path = dir.path() / "cfg.json";
  std::ofstream(cfg_path) << "{}";
  auto r = run_cli("inspect --config " + cfg_path.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("Total params: 22,420,131"), std::string::npos);
  EXPECT_NE(r.output.find("Trainable params: 617,077"), std::string::npos);
  EXPECT_NE(r.output.find("Non-trainable params: 21,803,054"), std::string::npos);
  EXPECT_NE(r.output.find("conv2d_95"), std::string::npos);
  EXPECT_NE(r.output.find("589856"), std::string::npos);
}

TEST(CliInspect, TinyBackboneTotalsAreConsistent) {
  testutil::TempDir dir("cli_inspect_tiny");
  auto cfg_path = dir.path() / "cfg.json";
  std::ofstream(cfg_path)
      << R"({"model": {"classes": 3, "backbone": {"kind": "tiny_trainable", "units": 2, "channels": 4}}})";
  auto r = run_cli("inspect --config " + cfg_path.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("tiny_backbone"), std::string::npos);
  EXPECT_NE(r.output.find("Total params:"), std::string::npos);
}
