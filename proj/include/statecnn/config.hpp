#pragma once

// Run configuration: one JSON document with strict validation (unknown
// keys rejected, every offending key reported at once) plus the named
// experiment presets. Defaults reproduce the training constants without
// any flag: 363-pixel inputs, 1/255 rescale, batch 32, rmsprop lr 0.001,
// sgd lr 0.0001 / decay 1e-6 / momentum 0.9, top-4 unfreezing, 7 classes.

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "statecnn/data.hpp"
#include "statecnn/model.hpp"
#include "statecnn/train.hpp"

namespace statecnn {

struct RunConfig {
  // dataset
  std::string dataset_root;
  int64_t image_side = 363;
  double rescale_factor = 1.0 / 255.0;
  bool standardize = false;
  std::string split_manifest;  // default: <output_dir>/split.json

  AugmentConfig augment;

  // model
  int64_t classes = 7;
  double dropout = 0.5;
  int head_blocks = 2;
  std::string backbone_kind = "shape_only";
  int64_t backbone_declared_params = 21802784;
  int64_t backbone_channels = 2048;
  int backbone_units = 6;

  StageConfig stage1{OptimizerConfig::stage1_default(), 100, 0};
  StageConfig stage2{OptimizerConfig::stage2_default(), 100, 4};

  int64_t batch_size = 32;
  uint64_t master_seed = 0;
  std::string output_dir = "out";
  bool keep_all_checkpoints = true;

  std::filesystem::path split_manifest_path() const {
    if (!split_manifest.empty()) return split_manifest;
    return std::filesystem::path(output_dir) / "split.json";
  }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {}

  ~ConfigReader() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key()))
        errors_.push_back("unknown key '" + at(it.key()) + "'");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.is_object() && j_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors_.push_back("key '" + at(key) + "' has the wrong type");
    }
  }

  nlohmann::json section(const std::string& key) {
    known_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nlohmann::json::object();
    if (!j_.at(key).is_object()) {
      errors_.push_back("key '" + at(key) + "' must be an object");
      return nlohmann::json::object();
    }
    return j_.at(key);
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

inline OptimizerKind optimizer_kind_from_name(const std::string& name,
                                              const std::string& where,
                                              std::vector<std::string>& errors) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "adam") return OptimizerKind::adam;
  errors.push_back("key '" + where + "' must be one of sgd|rmsprop|adam, got '" + name + "'");
  return OptimizerKind::rmsprop;
}

inline void read_stage(const nlohmann::json& j, const std::string& path,
                       StageConfig& stage, bool is_stage2,
                       std::vector<std::string>& errors) {
  ConfigReader r(j, path, errors);
  if (r.has("optimizer")) {
    std::string name;
    try {
      name = j.at("optimizer").get<std::string>();
      stage.optimizer.kind = optimizer_kind_from_name(name, r.at("optimizer"), errors);
    } catch (const nlohmann::json::exception&) {
      errors.push_back("key '" + r.at("optimizer") + "' has the wrong type");
    }
  }
  r.read("lr", stage.optimizer.lr);
  r.read("momentum", stage.optimizer.momentum);
  r.read("decay", stage.optimizer.decay);
  r.read("rho", stage.optimizer.rho);
  r.read("beta1", stage.optimizer.beta1);
  r.read("beta2", stage.optimizer.beta2);
  r.read("epsilon", stage.optimizer.epsilon);
  r.read("epochs", stage.epochs);
  if (is_stage2) r.read("unfreeze_top_k", stage.unfreeze_top_k);

  if (stage.optimizer.lr <= 0) errors.push_back("key '" + r.at("lr") + "' must be positive");
  int min_epochs = is_stage2 ? 0 : 1;  // stage2 epochs 0 disables fine-tuning
  if (stage.epochs < min_epochs)
    errors.push_back("key '" + r.at("epochs") + "' must be >= " + std::to_string(min_epochs));
  if (is_stage2 && stage.unfreeze_top_k < 0)
    errors.push_back("key '" + r.at("unfreeze_top_k") + "' must be >= 0");
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  std::vector<std::string> errors;
  RunConfig cfg;
  if (!j.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  {
    detail::ConfigReader top(j, "", errors);

    {
      auto section = top.section("dataset");
      detail::ConfigReader r(section, "dataset", errors);
      r.read("root", cfg.dataset_root);
      r.read("image_side", cfg.image_side);
      r.read("rescale", cfg.rescale_factor);
      r.read("standardize", cfg.standardize);
      r.read("split_manifest", cfg.split_manifest);
      if (cfg.image_side < 1) errors.push_back("key 'dataset.image_side' must be >= 1");
      if (cfg.rescale_factor <= 0) errors.push_back("key 'dataset.rescale' must be positive");
    }
    {
      auto section = top.section("augment");
      detail::ConfigReader r(section, "augment", errors);
      r.read("rotation_max_deg", cfg.augment.rotation_max_deg);
      r.read("zoom_range", cfg.augment.zoom_range);
      r.read("width_shift", cfg.augment.width_shift);
      r.read("height_shift", cfg.augment.height_shift);
      r.read("horizontal_flip", cfg.augment.horizontal_flip);
      if (r.has("fill_mode")) {
        try {
          cfg.augment.fill_mode = fill_mode_from_name(section.at("fill_mode").get<std::string>());
        } catch (const Error& e) {
          errors.push_back("key 'augment.fill_mode': " + std::string(e.what()));
        } catch (const nlohmann::json::exception&) {
          errors.push_back("key 'augment.fill_mode' has the wrong type");
        }
      }
      try {
        cfg.augment.validate();
      } catch (const Error& e) {
        errors.push_back("section 'augment': " + std::string(e.what()));
      }
    }
    {
      auto section = top.section("model");
      detail::ConfigReader r(section, "model", errors);
      r.read("classes", cfg.classes);
      r.read("dropout", cfg.dropout);
      r.read("head_blocks", cfg.head_blocks);
      if (cfg.classes < 2) errors.push_back("key 'model.classes' must be >= 2");
      if (cfg.dropout < 0 || cfg.dropout >= 1)
        errors.push_back("key 'model.dropout' must lie in [0,1)");
      if (cfg.head_blocks != 1 && cfg.head_blocks != 2)
        errors.push_back("key 'model.head_blocks' must be 1 or 2");

      auto backbone = r.section("backbone");
      detail::ConfigReader b(backbone, "model.backbone", errors);
      b.read("kind", cfg.backbone_kind);
      b.read("declared_params", cfg.backbone_declared_params);
      b.read("channels", cfg.backbone_channels);
      b.read("units", cfg.backbone_units);
      if (cfg.backbone_kind != "shape_only" && cfg.backbone_kind != "tiny_trainable")
        errors.push_back("key 'model.backbone.kind' must be shape_only or tiny_trainable");
      if (cfg.backbone_channels < 1)
        errors.push_back("key 'model.backbone.channels' must be >= 1");
      if (cfg.backbone_units < 1)
        errors.push_back("key 'model.backbone.units' must be >= 1");
    }
    detail::read_stage(top.section("stage1"), "stage1", cfg.stage1, false, errors);
    detail::read_stage(top.section("stage2"), "stage2", cfg.stage2, true, errors);
    {
      auto section = top.section("seeds");
      detail::ConfigReader r(section, "seeds", errors);
      r.read("master", cfg.master_seed);
    }
    top.read("output_dir", cfg.output_dir);
    top.read("batch_size", cfg.batch_size);
    if (cfg.batch_size < 1) errors.push_back("key 'batch_size' must be >= 1");
    if (top.has("checkpoint_retention")) {
      std::string retention;
      try {
        retention = j.at("checkpoint_retention").get<std::string>();
        if (retention == "all")
          cfg.keep_all_checkpoints = true;
        else if (retention == "best")
          cfg.keep_all_checkpoints = false;
        else
          errors.push_back("key 'checkpoint_retention' must be all|best");
      } catch (const nlohmann::json::exception&) {
        errors.push_back("key 'checkpoint_retention' has the wrong type");
      }
    }
  }

  if (!errors.empty()) {
    std::string joined = "invalid config:";
    for (const auto& e : errors) joined += "\n  - " + e;
    fail(ErrorKind::config, joined);
  }
  return cfg;
}

// STATECNN_SEED overrides seeds.master when set.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto cfg = parse_run_config(j);
  if (const char* env = std::getenv("STATECNN_SEED")) {
    char* end = nullptr;
    uint64_t seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      fail(ErrorKind::config, "STATECNN_SEED must be an unsigned integer");
    cfg.master_seed = seed;
  }
  return cfg;
}

// Seed streams derived from the master seed.
struct SeedPlan {
  uint64_t split;
  uint64_t model;
  uint64_t augment;
  uint64_t backbone;

  explicit SeedPlan(uint64_t master)
      : split(mix_seed(master, 0xA1)),
        model(mix_seed(master, 0xA2)),
        augment(mix_seed(master, 0xA3)),
        backbone(mix_seed(master, 0xA4)) {}
};

inline PipelineConfig pipeline_from_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.image_side = cfg.image_side;
  p.rescale_factor = static_cast<float>(cfg.rescale_factor);
  p.standardize = cfg.standardize;
  p.augment = cfg.augment;
  p.augment.seed = SeedPlan(cfg.master_seed).augment;
  return p;
}

template <typename T = float>
ModelGraph<T> model_from_config(const RunConfig& cfg) {
  SeedPlan seeds(cfg.master_seed);
  std::shared_ptr<Backbone<T>> backbone;
  if (cfg.backbone_kind == "shape_only")
    backbone = std::make_shared<ShapeOnlyBackbone<T>>(cfg.backbone_declared_params,
                                                      seeds.backbone, cfg.backbone_channels);
  else
    backbone = std::make_shared<TinyTrainableBackbone<T>>(cfg.backbone_units,
                                                          cfg.backbone_channels,
                                                          seeds.backbone);
  return ModelGraph<T>(cfg.classes, std::move(backbone), cfg.dropout, seeds.model,
                       cfg.head_blocks);
}

inline TrainConfig train_config_from(const RunConfig& cfg,
                                     const std::vector<std::string>& class_names) {
  TrainConfig t;
  t.stage1 = cfg.stage1;
  t.stage2 = cfg.stage2;
  t.batch_size = cfg.batch_size;
  t.master_seed = cfg.master_seed;
  t.pipeline = pipeline_from_config(cfg);
  t.output_dir = cfg.output_dir;
  t.keep_all_checkpoints = cfg.keep_all_checkpoints;
  t.class_names = class_names;
  return t;
}

// Named experiment presets: the four grid variants (one or two head conv
// blocks, with and without fine-tuning, fine-tune budgets as reported)
// plus the raised-rate SGD variant. Merge user config on top; dataset
// paths always come from the user.
inline nlohmann::json preset_config(const std::string& name) {
  nlohmann::json j = {{"model", {{"head_blocks", 2}}},
                      {"stage1", {{"optimizer", "rmsprop"}, {"lr", 1e-3}, {"epochs", 100}}},
                      {"stage2",
                       {{"optimizer", "sgd"},
                        {"lr", 1e-4},
                        {"decay", 1e-6},
                        {"momentum", 0.9},
                        {"epochs", 0},
                        {"unfreeze_top_k", 4}}},
                      {"batch_size", 32}};
  if (name == "one_block") {
    j["model"]["head_blocks"] = 1;
    j["stage1"]["epochs"] = 50;
  } else if (name == "two_block") {
    j["stage1"]["epochs"] = 100;
  } else if (name == "finetune") {
    j["stage2"]["epochs"] = 50;
  } else if (name == "finetune_from_best") {
    j["stage2"]["epochs"] = 31;
  } else if (name == "finetune_sgd_fast") {
    j["stage2"]["epochs"] = 31;
    j["stage2"]["lr"] = 1e-3;
  } else {
    fail(ErrorKind::config,
         "unknown preset '" + name +
             "'; available: one_block, two_block, finetune, finetune_from_best, "
             "finetune_sgd_fast");
  }
  return j;
}

// Recursive object merge; overlay values win over base.
inline nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overlay) {
  if (!overlay.is_object() || !base.is_object()) return overlay;
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      base[it.key()] = merge_config(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
  return base;
}

}  // namespace statecnn
