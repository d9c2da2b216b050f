// Command-line entry point: prepare, train, evaluate, predict, inspect.
//
// Exit codes: 0 success, 2 input error (bad paths, bad config, bad data),
// 3 state error (missing prerequisite like a stage-1 checkpoint),
// 4 internal error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "statecnn/config.hpp"
#include "statecnn/data.hpp"
#include "statecnn/image.hpp"
#include "statecnn/model.hpp"
#include "statecnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace statecnn;

namespace {

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::state:
      return 3;
    case ErrorKind::internal:
      return 4;
    default:
      return 2;
  }
}

uint64_t env_seed_or(uint64_t fallback) {
  if (const char* env = std::getenv("STATECNN_SEED")) {
    char* end = nullptr;
    uint64_t seed = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return seed;
    fail(ErrorKind::config, "STATECNN_SEED must be an unsigned integer");
  }
  return fallback;
}

// --- prepare ---------------------------------------------------------------

int cmd_prepare(const std::string& data_root, const std::string& out_dir,
                uint64_t seed, bool seed_given) {
  if (!seed_given) seed = env_seed_or(seed);
  int warnings = 0;
  auto dataset = scan_directory(data_root, &warnings);
  if (warnings)
    std::cerr << "warning: skipped " << warnings << " undecodable file(s)\n";

  auto [train, val] = partition(dataset, 0.8, seed);
  fs::create_directories(out_dir);
  auto manifest = make_split_manifest(data_root, train, val, seed, 0.8);
  auto manifest_path = fs::path(out_dir) / "split.json";
  write_split_manifest(manifest_path, manifest);

  size_t name_w = 5;
  for (const auto& c : dataset.classes) name_w = std::max(name_w, c.size());
  std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << "class"
            << std::right << std::setw(8) << "train" << std::setw(8) << "val" << "\n";
  for (int64_t c = 0; c < dataset.class_count(); ++c) {
    int64_t t = 0, v = 0;
    for (const auto& s : train.samples) t += s.label == c;
    for (const auto& s : val.samples) v += s.label == c;
    std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << dataset.classes[c]
              << std::right << std::setw(8) << t << std::setw(8) << v << "\n";
  }
  std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << "total"
            << std::right << std::setw(8) << train.size() << std::setw(8) << val.size()
            << "\n";
  std::cout << "wrote: " << manifest_path.string() << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

json history_to_json(const std::vector<EpochMetrics>& history) {
  json rows = json::array();
  for (const auto& m : history)
    rows.push_back({{"stage", m.stage},
                    {"epoch", m.epoch},
                    {"train_loss", m.train_loss},
                    {"train_acc", m.train_acc},
                    {"val_loss", m.val_loss},
                    {"val_acc", m.val_acc},
                    {"checkpoint", m.checkpoint_path}});
  return rows;
}

std::vector<EpochMetrics> history_from_json(const json& rows) {
  std::vector<EpochMetrics> history;
  for (const auto& r : rows) {
    EpochMetrics m;
    m.stage = r.at("stage").get<int>();
    m.epoch = r.at("epoch").get<int>();
    m.train_loss = r.at("train_loss").get<double>();
    m.train_acc = r.at("train_acc").get<double>();
    m.val_loss = r.at("val_loss").get<double>();
    m.val_acc = r.at("val_acc").get<double>();
    m.checkpoint_path = r.at("checkpoint").get<std::string>();
    history.push_back(std::move(m));
  }
  return history;
}

void print_selected(const EpochMetrics& best) {
  std::cout << std::fixed << std::setprecision(6) << "selected: "
            << best.checkpoint_path << " (stage " << best.stage << " epoch "
            << best.epoch << ", val_loss " << best.val_loss << ", val_acc "
            << best.val_acc << ")\n";
}

int cmd_train(const std::string& config_path, const std::string& stage,
              const std::string& preset) {
  auto started = std::chrono::steady_clock::now();

  std::ifstream in(config_path);
  if (!in) fail(ErrorKind::input, "cannot open config '" + config_path + "'");
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config is not valid JSON: " + std::string(e.what()));
  }
  if (!preset.empty()) user = merge_config(preset_config(preset), user);
  auto cfg = parse_run_config(user);
  cfg.master_seed = env_seed_or(cfg.master_seed);

  // Resolve the split: reuse an existing manifest, otherwise partition now
  // and write one so the split is reproducible.
  SeedPlan seeds(cfg.master_seed);
  auto manifest_path = cfg.split_manifest_path();
  SplitManifest manifest;
  if (fs::exists(manifest_path)) {
    manifest = read_split_manifest(manifest_path);
  } else {
    if (cfg.dataset_root.empty())
      fail(ErrorKind::input, "config has no dataset.root and no split manifest exists at '" +
                                 manifest_path.string() + "'");
    auto dataset = scan_directory(cfg.dataset_root);
    auto [train, val] = partition(dataset, 0.8, seeds.split);
    manifest = make_split_manifest(cfg.dataset_root, train, val, seeds.split, 0.8);
    fs::create_directories(manifest_path.parent_path().empty() ? "." : manifest_path.parent_path());
    write_split_manifest(manifest_path, manifest);
    std::cout << "wrote: " << manifest_path.string() << "\n";
  }

  if (static_cast<int64_t>(manifest.classes.size()) != cfg.classes)
    fail(ErrorKind::config, "dataset has " + std::to_string(manifest.classes.size()) +
                                " classes but model.classes is " +
                                std::to_string(cfg.classes));

  auto train_set = load_split(manifest.root, manifest.classes, manifest.train_paths);
  auto val_set = load_split(manifest.root, manifest.classes, manifest.val_paths);

  auto model = model_from_config(cfg);
  auto tcfg = train_config_from(cfg, manifest.classes);

  auto history_path = fs::path(cfg.output_dir) / "history.json";
  auto best_path = fs::path(cfg.output_dir) / "stage1_best.json";
  std::vector<EpochMetrics> history;
  fs::create_directories(cfg.output_dir);

  bool run1 = stage == "1" || stage == "all";
  bool run2 = (stage == "2" || stage == "all") && cfg.stage2.epochs > 0;

  std::string stage1_best_ckpt;
  if (run1) {
    auto out = run_stage1(model, train_set, val_set, tcfg, &std::cout);
    history = out.history;
    stage1_best_ckpt = out.best.checkpoint_path;
    json pointer = {{"checkpoint", out.best.checkpoint_path},
                    {"epoch", out.best.epoch},
                    {"val_loss", out.best.val_loss},
                    {"val_acc", out.best.val_acc}};
    std::ofstream(best_path) << pointer.dump(2) << "\n";
    print_selected(out.best);
  } else if (fs::exists(history_path)) {
    std::ifstream h(history_path);
    json rows;
    h >> rows;
    for (auto& m : history_from_json(rows))
      if (m.stage == 1) history.push_back(std::move(m));
  }

  if (run2) {
    if (stage1_best_ckpt.empty()) {
      if (!fs::exists(best_path))
        fail(ErrorKind::state,
             "no stage-1 result under '" + cfg.output_dir + "'; run --stage 1 first");
      std::ifstream p(best_path);
      json pointer;
      p >> pointer;
      stage1_best_ckpt = pointer.at("checkpoint").get<std::string>();
    }
    auto out = run_stage2(model, stage1_best_ckpt, train_set, val_set, tcfg, &std::cout);
    for (auto& m : out.history) history.push_back(m);
    print_selected(out.best);
  } else if (stage == "2" && cfg.stage2.epochs == 0) {
    fail(ErrorKind::config, "stage2.epochs is 0; nothing to run");
  }

  std::ofstream(history_path) << history_to_json(history).dump(2) << "\n";
  export_metrics(history, cfg.output_dir);
  std::cout << "metrics: " << (fs::path(cfg.output_dir) / "metrics.csv").string() << "\n";

  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
  std::cout << "# time: " << std::setprecision(1) << elapsed.count() << "s\n";
  return 0;
}

// --- evaluate ----------------------------------------------------------------

Dataset dataset_for_eval(const std::string& data, const CheckpointInfo& info) {
  Dataset ds;
  if (fs::is_directory(data)) {
    ds = scan_directory(data);
  } else {
    auto manifest = read_split_manifest(data);
    ds = load_split(manifest.root, manifest.classes, manifest.val_paths);
  }
  if (!info.class_names.empty() && ds.classes != info.class_names) {
    std::string msg = "checkpoint classes {";
    for (const auto& c : info.class_names) msg += c + ",";
    msg += "} do not match dataset classes {";
    for (const auto& c : ds.classes) msg += c + ",";
    msg += "}";
    fail(ErrorKind::input, msg);
  }
  return ds;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data,
                 const std::string& json_out) {
  auto [model, info] = load_checkpoint_model<float>(checkpoint);
  auto ds = dataset_for_eval(data, info);

  PipelineConfig pipeline;
  pipeline.image_side = info.image_side;
  pipeline.rescale_factor = static_cast<float>(info.rescale_factor);
  pipeline.standardize = info.standardize;
  pipeline.augment = AugmentConfig::off();

  auto r = evaluate(model, ds, pipeline, 32);
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "loss: " << r.loss << "\n";
  std::cout << "accuracy: " << r.accuracy << "\n";

  size_t name_w = 4;
  for (const auto& c : ds.classes) name_w = std::max(name_w, c.size());
  std::cout << "confusion matrix (rows true, columns predicted):\n";
  std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << "";
  for (const auto& c : ds.classes) std::cout << std::right << std::setw(static_cast<int>(name_w + 2)) << c;
  std::cout << "\n";
  for (int64_t i = 0; i < ds.class_count(); ++i) {
    std::cout << std::left << std::setw(static_cast<int>(name_w + 2)) << ds.classes[i];
    for (int64_t j = 0; j < ds.class_count(); ++j)
      std::cout << std::right << std::setw(static_cast<int>(name_w + 2)) << r.confusion[i][j];
    std::cout << "\n";
  }

  if (!json_out.empty()) {
    json out = {{"loss", r.loss},
                {"accuracy", r.accuracy},
                {"classes", ds.classes},
                {"confusion", r.confusion}};
    std::ofstream f(json_out);
    f << out.dump(2) << "\n";
    if (!f) fail(ErrorKind::io, "cannot write '" + json_out + "'");
    std::cout << "wrote: " << json_out << "\n";
  }
  return 0;
}

// --- predict -----------------------------------------------------------------

int cmd_predict(const std::string& checkpoint, const std::string& image_path) {
  auto [model, info] = load_checkpoint_model<float>(checkpoint);
  auto img = decode_image(image_path);
  img = resize_bilinear(img, info.image_side);
  img = rescale(img, static_cast<float>(info.rescale_factor));
  if (info.standardize) img = standardize(img);

  Tensor<float> batch({1, info.image_side, info.image_side, 3});
  batch.data = img.data;
  auto probs = model.forward(batch, Phase::inference);

  const int64_t k = model.classes();
  std::vector<std::pair<float, int64_t>> ranked;
  for (int64_t j = 0; j < k; ++j) ranked.emplace_back(probs.at(0, j), j);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  auto name_of = [&](int64_t j) {
    return j < static_cast<int64_t>(info.class_names.size())
               ? info.class_names[j]
               : "class_" + std::to_string(j);
  };
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "prediction: " << name_of(ranked[0].second) << " (p = "
            << ranked[0].first << ")\n";
  std::cout << "probabilities:\n";
  for (const auto& [p, j] : ranked)
    std::cout << "  " << std::left << std::setw(24) << name_of(j) << std::right << p << "\n";
  return 0;
}

// --- inspect -----------------------------------------------------------------

int cmd_inspect(const std::string& config_path) {
  auto cfg = load_run_config(config_path);
  auto model = model_from_config(cfg);
  std::cout << summarize(model).str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object state classifier"};
  app.require_subcommand(1);

  std::string data_root, out_dir, config_path, checkpoint, image_path, json_out;
  std::string stage = "all", preset;
  uint64_t seed = 0;

  auto* prepare = app.add_subcommand("prepare", "scan a dataset tree and write the split manifest");
  prepare->add_option("--data", data_root, "dataset root (one directory per class)")->required();
  prepare->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = prepare->add_option("--seed", seed, "partition shuffle seed");

  auto* train = app.add_subcommand("train", "run the two-stage training protocol");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--stage", stage, "1, 2, or all")
      ->check(CLI::IsMember({"1", "2", "all"}));
  train->add_option("--preset", preset, "experiment preset to merge under the config");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--data", data_root, "dataset directory or split manifest")->required();
  evaluate->add_option("--json", json_out, "also write metrics as JSON");

  auto* predict = app.add_subcommand("predict", "classify one image");
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--image", image_path, "image to classify")->required();

  auto* inspect = app.add_subcommand("inspect", "print the model summary for a config");
  inspect->add_option("--config", config_path, "run config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(data_root, out_dir, seed, seed_opt->count() > 0);
    if (train->parsed()) return cmd_train(config_path, stage, preset);
    if (evaluate->parsed()) return cmd_evaluate(checkpoint, data_root, json_out);
    if (predict->parsed()) return cmd_predict(checkpoint, image_path);
    if (inspect->parsed()) return cmd_inspect(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
