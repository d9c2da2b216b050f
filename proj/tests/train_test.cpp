#include "statecnn/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "testutil.hpp"

using namespace statecnn;

namespace {

// In-memory dataset of class-coded patterns; labels correlate with content.
Dataset pattern_dataset(int64_t classes, int64_t per_class, int64_t side, uint64_t seed) {
  Dataset d;
  for (int64_t c = 0; c < classes; ++c) d.classes.push_back("class_" + std::to_string(c));
  for (int64_t c = 0; c < classes; ++c)
    for (int64_t i = 0; i < per_class; ++i) {
      Sample s;
      s.image = testutil::class_pattern(side, c, mix_seed(seed, c, i));
      s.label = c;
      s.source_path = d.classes[c] + "/img_" + std::to_string(i) + ".png";
      d.samples.push_back(std::move(s));
    }
  return d;
}

// Labels drawn independently of image content.
Dataset random_label_dataset(int64_t n, int64_t classes, uint64_t seed) {
  Dataset d;
  for (int64_t c = 0; c < classes; ++c) d.classes.push_back("class_" + std::to_string(c));
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    Sample s;
    s.image = Tensor<float>::uniform({8, 8, 3}, 0, 255, mix_seed(seed, i));
    s.label = static_cast<int64_t>(index_draw(rng, classes));
    s.source_path = "x/" + std::to_string(i);
    d.samples.push_back(std::move(s));
  }
  return d;
}

TrainConfig fast_config(const std::string& out_dir, int epochs1, int epochs2,
                        int unfreeze_k) {
  TrainConfig cfg;
  cfg.stage1.epochs = epochs1;
  cfg.stage2.epochs = epochs2;
  cfg.stage2.unfreeze_top_k = unfreeze_k;
  cfg.batch_size = 4;
  cfg.master_seed = 77;
  cfg.pipeline.image_side = 12;
  cfg.pipeline.augment = AugmentConfig::off();
  cfg.output_dir = out_dir;
  return cfg;
}

ModelGraph<float> tiny_model(int units = 3, uint64_t seed = 5, double dropout = 0.0) {
  return ModelGraph<float>(3, std::make_shared<TinyTrainableBackbone<float>>(units, 4, 9),
                           dropout, seed);
}

std::vector<std::vector<float>> backbone_bytes(ModelGraph<float>& m) {
  std::vector<std::vector<float>> out;
  for (auto* slot : m.backbone().params()) out.push_back(slot->value.data);
  return out;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Tiny structural well-formedness scan: every open tag is closed in order.
bool xml_well_formed(const std::string& text, int* polylines = nullptr) {
  if (polylines) *polylines = 0;
  std::vector<std::string> stack;
  size_t i = 0;
  while ((i = text.find('<', i)) != std::string::npos) {
    size_t j = text.find('>', i);
    if (j == std::string::npos) return false;
    std::string tag = text.substr(i + 1, j - i - 1);
    if (tag.empty()) return false;
    if (tag[0] == '?') {
      i = j + 1;
      continue;
    }
    if (tag[0] == '/') {
      std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      std::string name = tag.substr(0, tag.find_first_of(" \t/>"));
      if (polylines && name == "polyline") ++*polylines;
      if (tag.back() != '/') stack.push_back(name);
    }
    i = j + 1;
  }
  return stack.empty();
}

}  // namespace

TEST(SelectBest, SingleAndLowestTimestamp) {
  EpochMetrics only;
  only.epoch = 4;
  only.val_loss = 0.5;
  EXPECT_EQ(select_best({only}).epoch, 4);

  std::vector<EpochMetrics> h;
  for (int i = 0; i < 4; ++i) {
    EpochMetrics m;
    m.epoch = i + 1;
    m.val_loss = std::vector<double>{1.0, 0.8, 0.8, 0.9}[i];
    m.val_acc = 0.5;
    h.push_back(m);
  }
  EXPECT_EQ(select_best(h).epoch, 2);  // first of the tied 0.8s
}

TEST(SelectBest, PlateauPicksFirstMinimum) {
  // Validation loss falls until epoch 31, then stops progressing.
  std::vector<EpochMetrics> h;
  for (int e = 1; e <= 100; ++e) {
    EpochMetrics m;
    m.epoch = e;
    m.val_loss = e <= 31 ? 2.0 - 0.04 * e : 2.0 - 0.04 * 31;
    m.val_acc = 0.7;
    h.push_back(m);
  }
  EXPECT_EQ(select_best(h).epoch, 31);
}

TEST(SelectBest, AccuracyBreaksTies) {
  std::vector<EpochMetrics> h(2);
  h[0].epoch = 1;
  h[0].val_loss = 0.5;
  h[0].val_acc = 0.6;
  h[1].epoch = 2;
  h[1].val_loss = 0.5;
  h[1].val_acc = 0.9;
  EXPECT_EQ(select_best(h).epoch, 2);
}

TEST(SelectBest, MatchesSortOracleAndIgnoresOrder) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<EpochMetrics> h;
    int n = 3 + static_cast<int>(index_draw(rng, 40));
    for (int i = 0; i < n; ++i) {
      EpochMetrics m;
      m.epoch = i + 1;
      // Coarse grid forces plenty of ties.
      m.val_loss = static_cast<double>(index_draw(rng, 4)) * 0.25;
      m.val_acc = static_cast<double>(index_draw(rng, 3)) * 0.5;
      h.push_back(m);
    }
    auto sorted = h;
    std::sort(sorted.begin(), sorted.end(), [](const EpochMetrics& a, const EpochMetrics& b) {
      if (a.val_loss != b.val_loss) return a.val_loss < b.val_loss;
      if (a.val_acc != b.val_acc) return a.val_acc > b.val_acc;
      return a.epoch < b.epoch;
    });
    EXPECT_EQ(select_best(h).epoch, sorted.front().epoch) << "seed " << seed;

    auto shuffled = h;
    seeded_shuffle(shuffled.begin(), shuffled.end(), mix_seed(seed, 1));
    EXPECT_EQ(select_best(shuffled).epoch, select_best(h).epoch);
  }
}

TEST(SelectBest, EmptyHistoryThrows) {
  EXPECT_THROW(select_best({}), Error);
}

TEST(Evaluate, ConfusionCountingIdentities) {
  auto d = pattern_dataset(3, 6, 12, 4);
  auto m = tiny_model();
  PipelineConfig pipeline;
  pipeline.image_side = 12;
  auto r = evaluate(m, d, pipeline, 4);

  int64_t trace = 0, total = 0;
  for (int64_t c = 0; c < 3; ++c) {
    int64_t row_sum = 0;
    for (int64_t j = 0; j < 3; ++j) row_sum += r.confusion[c][j];
    EXPECT_EQ(row_sum, 6);  // per-class sample count
    trace += r.confusion[c][c];
    total += row_sum;
  }
  EXPECT_EQ(total, d.size());
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / static_cast<double>(total));
  EXPECT_GE(r.loss, 0.0);
}

TEST(Evaluate, ContentBlindLabelsScoreChanceAccuracy) {
  // Labels are independent of the images, so any fixed predictor scores
  // 1/7 in expectation (n = 700, fixed seed).
  auto d = random_label_dataset(700, 7, 11);
  ModelGraph<float> m(7, std::make_shared<ShapeOnlyBackbone<float>>(100, 2, 8), 0.0, 3);
  PipelineConfig pipeline;
  pipeline.image_side = 16;
  auto r = evaluate(m, d, pipeline, 50);
  EXPECT_NEAR(r.accuracy, 1.0 / 7.0, 0.05);
}

TEST(Evaluate, ErrorsOnEmptyOrMismatchedData) {
  auto m = tiny_model();
  PipelineConfig pipeline;
  Dataset empty;
  empty.classes = {"a", "b", "c"};
  EXPECT_THROW(evaluate(m, empty, pipeline), Error);

  auto wrong_k = pattern_dataset(4, 3, 12, 1);
  EXPECT_THROW(evaluate(m, wrong_k, pipeline), Error);
}

TEST(Stage1, FreezesBackboneAndWritesEveryCheckpoint) {
  testutil::TempDir dir("stage1");
  auto d = pattern_dataset(3, 6, 12, 21);
  auto [train, val] = partition(d, 0.8, 3);
  auto model = tiny_model();
  auto before = backbone_bytes(model);

  auto cfg = fast_config(dir.path().string(), 3, 1, 2);
  auto out = run_stage1(model, train, val, cfg);

  EXPECT_EQ(backbone_bytes(model), before);  // frozen throughout
  ASSERT_EQ(out.history.size(), 3u);
  for (int e = 1; e <= 3; ++e) {
    const auto& m = out.history[e - 1];
    EXPECT_EQ(m.stage, 1);
    EXPECT_EQ(m.epoch, e);
    EXPECT_TRUE(std::filesystem::exists(m.checkpoint_path)) << m.checkpoint_path;
    EXPECT_NE(m.checkpoint_path.find("stage1_epoch00" + std::to_string(e)),
              std::string::npos);
  }
  // The selected best loads back.
  auto [loaded, info] = load_checkpoint_model<float>(out.best.checkpoint_path);
  EXPECT_EQ(info.stage, 1);
  EXPECT_EQ(info.epoch, out.best.epoch);
}

TEST(Stage1, LossDecreasesOnSeparableData) {
  testutil::TempDir dir("stage1_learn");
  auto d = pattern_dataset(3, 8, 12, 33);
  auto [train, val] = partition(d, 0.8, 5);
  auto model = tiny_model();
  auto cfg = fast_config(dir.path().string(), 8, 1, 2);
  auto out = run_stage1(model, train, val, cfg);
  EXPECT_LT(out.history.back().train_loss, out.history.front().train_loss);
}

TEST(Stage2, RequiresStage1Checkpoint) {
  testutil::TempDir dir("stage2_missing");
  auto d = pattern_dataset(3, 4, 12, 2);
  auto [train, val] = partition(d, 0.8, 1);
  auto model = tiny_model();
  auto cfg = fast_config(dir.path().string(), 1, 1, 2);
  try {
    run_stage2(model, (dir.path() / "absent.ckpt").string(), train, val, cfg);
    FAIL() << "expected state error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::state);
  }
}

TEST(Stage2, UnfreezesTopUnitsOnly) {
  testutil::TempDir dir("stage2");
  auto d = pattern_dataset(3, 6, 12, 8);
  auto [train, val] = partition(d, 0.8, 9);

  auto model = tiny_model(3);
  auto init = backbone_bytes(model);
  auto cfg = fast_config(dir.path().string(), 2, 2, 2);

  auto s1 = run_stage1(model, train, val, cfg);
  auto s2 = run_stage2(model, s1.best.checkpoint_path, train, val, cfg);

  auto after = backbone_bytes(model);
  // Unit 1 (bottom) never unfroze: slots 0,1. Units 2..3: slots 2..5.
  EXPECT_EQ(after[0], init[0]);
  EXPECT_EQ(after[1], init[1]);
  bool top_changed = after[2] != init[2] || after[4] != init[4];
  EXPECT_TRUE(top_changed);

  ASSERT_EQ(s2.history.size(), 2u);
  EXPECT_EQ(s2.history[0].stage, 2);
  EXPECT_NE(s2.history[0].checkpoint_path.find("stage2_epoch001"), std::string::npos);
}

TEST(Training, DeterministicAcrossRuns) {
  auto d = pattern_dataset(3, 6, 12, 50);
  auto [train, val] = partition(d, 0.8, 13);

  testutil::TempDir dir_a("det_a"), dir_b("det_b");
  AugmentConfig aug;  // defaults on, seeded
  aug.seed = 123;

  auto run = [&](const std::string& out_dir) {
    auto model = tiny_model(3, 5, 0.25);
    auto cfg = fast_config(out_dir, 3, 1, 2);
    cfg.pipeline.augment = aug;
    return run_stage1(model, train, val, cfg);
  };
  auto ra = run(dir_a.path().string());
  auto rb = run(dir_b.path().string());

  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_DOUBLE_EQ(ra.history[i].train_loss, rb.history[i].train_loss);
    EXPECT_DOUBLE_EQ(ra.history[i].val_acc, rb.history[i].val_acc);
    EXPECT_EQ(file_bytes(ra.history[i].checkpoint_path),
              file_bytes(rb.history[i].checkpoint_path));
  }
}

TEST(Training, RetentionFlagPrunesToBest) {
  testutil::TempDir dir("retention");
  auto d = pattern_dataset(3, 4, 12, 4);
  auto [train, val] = partition(d, 0.8, 2);
  auto model = tiny_model();
  auto cfg = fast_config(dir.path().string(), 3, 1, 2);
  cfg.keep_all_checkpoints = false;
  auto out = run_stage1(model, train, val, cfg);
  for (const auto& m : out.history) {
    bool is_best = m.checkpoint_path == out.best.checkpoint_path;
    EXPECT_EQ(std::filesystem::exists(m.checkpoint_path), is_best);
  }
}

TEST(ExportMetrics, TableShapedHistoryRoundTrips) {
  // 100 stage-1 rows plus 31 fine-tuning rows.
  std::vector<EpochMetrics> history;
  Rng rng(5);
  for (int stage : {1, 2}) {
    int epochs = stage == 1 ? 100 : 31;
    for (int e = 1; e <= epochs; ++e) {
      EpochMetrics m;
      m.stage = stage;
      m.epoch = e;
      m.train_loss = unit_draw(rng) * 2;
      m.train_acc = unit_draw(rng);
      m.val_loss = unit_draw(rng) * 2;
      m.val_acc = unit_draw(rng);
      history.push_back(m);
    }
  }

  testutil::TempDir dir("export");
  export_metrics(history, dir.path());

  std::ifstream csv(dir.path() / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,stage,train_loss,train_acc,val_loss,val_acc");
  size_t rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    ASSERT_EQ(fields.size(), 6u);
    const auto& m = history[rows];
    EXPECT_EQ(std::stoi(fields[0]), m.epoch);
    EXPECT_EQ(std::stoi(fields[1]), m.stage);
    EXPECT_NEAR(std::stod(fields[2]), m.train_loss, 5e-7);
    EXPECT_NEAR(std::stod(fields[3]), m.train_acc, 5e-7);
    EXPECT_NEAR(std::stod(fields[4]), m.val_loss, 5e-7);
    EXPECT_NEAR(std::stod(fields[5]), m.val_acc, 5e-7);
    ++rows;
  }
  EXPECT_EQ(rows, 131u);

  for (const char* name : {"accuracy.svg", "loss.svg"}) {
    auto text = file_bytes((dir.path() / name).string());
    int polylines = 0;
    EXPECT_TRUE(xml_well_formed(text, &polylines)) << name;
    EXPECT_EQ(polylines, 4) << name;  // train+val for each of two stages
  }
}

TEST(ExportMetrics, EmptyHistoryThrows) {
  testutil::TempDir dir("export_empty");
  EXPECT_THROW(export_metrics({}, dir.path()), Error);
}
