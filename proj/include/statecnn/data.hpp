#pragma once

// Data pipeline: class-per-directory ingestion, stratified 4:1
// partitioning, bilinear resizing, 1/255 rescaling, optional per-image
// standardization, seeded augmentation, and one-hot mini-batches.
//
// Per-sample processing order is resize -> rescale -> augment (training
// only) -> standardize (when enabled).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statecnn/image.hpp"
#include "statecnn/tensor.hpp"

namespace statecnn {

struct Sample {
  Tensor<float> image;  // [H,W,3], values in [0,255]
  int64_t label = 0;
  std::string source_path;  // relative to the dataset root
};

struct Dataset {
  std::vector<std::string> classes;
  std::vector<Sample> samples;

  int64_t class_count() const { return static_cast<int64_t>(classes.size()); }
  int64_t size() const { return static_cast<int64_t>(samples.size()); }
};

enum class FillMode { nearest, constant_zero, reflect };

inline std::string fill_mode_name(FillMode m) {
  switch (m) {
    case FillMode::nearest: return "nearest";
    case FillMode::constant_zero: return "constant";
    case FillMode::reflect: return "reflect";
  }
  return "nearest";
}

inline FillMode fill_mode_from_name(const std::string& name) {
  if (name == "nearest") return FillMode::nearest;
  if (name == "constant") return FillMode::constant_zero;
  if (name == "reflect") return FillMode::reflect;
  fail(ErrorKind::config, "unknown fill_mode '" + name + "'");
}

struct AugmentConfig {
  double rotation_max_deg = 20.0;
  double zoom_range = 0.1;
  double width_shift = 0.1;
  double height_shift = 0.1;
  bool horizontal_flip = true;
  FillMode fill_mode = FillMode::nearest;
  uint64_t seed = 0;

  void validate() const {
    if (rotation_max_deg < 0)
      fail(ErrorKind::config, "rotation_max_deg must be nonnegative");
    if (zoom_range < 0 || zoom_range >= 1)
      fail(ErrorKind::config, "zoom_range must lie in [0,1)");
    if (width_shift < 0 || width_shift >= 1 || height_shift < 0 || height_shift >= 1)
      fail(ErrorKind::config, "shift fractions must lie in [0,1)");
  }

  static AugmentConfig off() {
    AugmentConfig c;
    c.rotation_max_deg = 0;
    c.zoom_range = 0;
    c.width_shift = 0;
    c.height_shift = 0;
    c.horizontal_flip = false;
    return c;
  }
};

struct Batch {
  Tensor<float> images;         // [B,S,S,3], values in [0,1]
  Tensor<float> labels_onehot;  // [B,K]
};

// --- ingestion ------------------------------------------------------------

// Scans root/<class>/<image files>. Classes are the subdirectory names in
// lexicographic order; files within a class are visited in sorted order,
// so two scans of the same tree enumerate identically. Undecodable files
// are skipped and counted into *warnings.
inline Dataset scan_directory(const std::filesystem::path& root, int* warnings = nullptr) {
  namespace fs = std::filesystem;
  if (warnings) *warnings = 0;
  if (!fs::is_directory(root))
    fail(ErrorKind::input, "dataset root '" + root.string() + "' is not a directory");

  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty())
    fail(ErrorKind::input, "dataset root '" + root.string() + "' has no class directories");

  Dataset d;
  d.classes = classes;
  for (size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / classes[ci]))
      if (entry.is_regular_file() && looks_like_image_file(entry.path().filename().string()))
        files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());

    int64_t decoded = 0;
    for (const auto& file : files) {
      std::string rel = classes[ci] + "/" + file;
      try {
        Sample s;
        s.image = decode_image((root / rel).string());
        s.label = static_cast<int64_t>(ci);
        s.source_path = rel;
        d.samples.push_back(std::move(s));
        ++decoded;
      } catch (const Error&) {
        if (warnings) ++*warnings;
      }
    }
    if (decoded == 0)
      fail(ErrorKind::input,
           "class directory '" + classes[ci] + "' has no decodable images");
  }
  return d;
}

// --- partitioning -----------------------------------------------------------

// Stratified split: per-class seeded shuffle, then the first
// floor(ratio * n_c) samples of each class go to the training split.
inline std::pair<Dataset, Dataset> partition(const Dataset& d, double ratio = 0.8,
                                             uint64_t seed = 0) {
  if (ratio <= 0.0 || ratio >= 1.0)
    fail(ErrorKind::config, "partition ratio must lie in (0,1)");
  Dataset train, val;
  train.classes = d.classes;
  val.classes = d.classes;
  for (int64_t c = 0; c < d.class_count(); ++c) {
    std::vector<int64_t> members;
    for (int64_t i = 0; i < d.size(); ++i)
      if (d.samples[i].label == c) members.push_back(i);
    if (members.size() < 2)
      fail(ErrorKind::input, "class '" + d.classes[c] + "' has fewer than 2 samples");
    seeded_shuffle(members.begin(), members.end(), mix_seed(seed, static_cast<uint64_t>(c)));
    auto take = static_cast<size_t>(std::floor(ratio * static_cast<double>(members.size())));
    for (size_t i = 0; i < members.size(); ++i) {
      auto& dst = i < take ? train : val;
      dst.samples.push_back(d.samples[members[i]]);
    }
  }
  return {std::move(train), std::move(val)};
}

// --- per-image transforms --------------------------------------------------

namespace detail {

// Bilinear tap with out-of-range handling per fill mode.
inline float sample_bilinear(const Tensor<float>& img, double sy, double sx,
                             int64_t channel, FillMode fill) {
  const int64_t h = img.shape[0], w = img.shape[1];
  auto tap = [&](int64_t y, int64_t x) -> float {
    if (y >= 0 && y < h && x >= 0 && x < w) return img.at(y, x, channel);
    switch (fill) {
      case FillMode::constant_zero:
        return 0.0f;
      case FillMode::nearest:
        y = std::clamp<int64_t>(y, 0, h - 1);
        x = std::clamp<int64_t>(x, 0, w - 1);
        return img.at(y, x, channel);
      case FillMode::reflect: {
        while (y < 0 || y >= h) y = y < 0 ? -y : 2 * (h - 1) - y;
        while (x < 0 || x >= w) x = x < 0 ? -x : 2 * (w - 1) - x;
        return img.at(y, x, channel);
      }
    }
    return 0.0f;
  };
  int64_t y0 = static_cast<int64_t>(std::floor(sy));
  int64_t x0 = static_cast<int64_t>(std::floor(sx));
  double wy = sy - static_cast<double>(y0);
  double wx = sx - static_cast<double>(x0);
  double top = (1.0 - wx) * tap(y0, x0) + wx * tap(y0, x0 + 1);
  double bottom = (1.0 - wx) * tap(y0 + 1, x0) + wx * tap(y0 + 1, x0 + 1);
  return static_cast<float>((1.0 - wy) * top + wy * bottom);
}

}  // namespace detail

// Bilinear resize to side x side with half-pixel sample centers; a
// same-size resize returns the input bit-identically.
inline Tensor<float> resize_bilinear(const Tensor<float>& img, int64_t side = 363) {
  if (img.shape.rank() != 3 || img.shape[2] != 3)
    fail(ErrorKind::shape, "resize expects [H,W,3] input, got " + img.shape.str());
  if (side < 1) fail(ErrorKind::config, "resize side must be >= 1");
  const int64_t h = img.shape[0], w = img.shape[1];
  if (h == side && w == side) return img;

  Tensor<float> out({side, side, 3});
  const double sy_scale = static_cast<double>(h) / static_cast<double>(side);
  const double sx_scale = static_cast<double>(w) / static_cast<double>(side);
  for (int64_t y = 0; y < side; ++y) {
    double sy = (static_cast<double>(y) + 0.5) * sy_scale - 0.5;
    for (int64_t x = 0; x < side; ++x) {
      double sx = (static_cast<double>(x) + 0.5) * sx_scale - 0.5;
      for (int64_t c = 0; c < 3; ++c)
        out.at(y, x, c) = detail::sample_bilinear(img, sy, sx, c, FillMode::nearest);
    }
  }
  return out;
}

inline Tensor<float> rescale(const Tensor<float>& img, float factor = 1.0f / 255.0f) {
  Tensor<float> out = img;
  for (auto& v : out.data) v *= factor;
  return out;
}

// Per-image standardization: subtract the image mean, divide by the image
// standard deviation. Zero-variance images are returned unchanged and
// counted into *zero_variance_warnings.
inline Tensor<float> standardize(const Tensor<float>& img,
                                 int* zero_variance_warnings = nullptr) {
  double mean = 0;
  for (float v : img.data) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0;
  for (float v : img.data) {
    double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(img.size());
  if (var == 0.0) {
    if (zero_variance_warnings) ++*zero_variance_warnings;
    return img;
  }
  double inv_std = 1.0 / std::sqrt(var);
  Tensor<float> out(img.shape);
  for (int64_t i = 0; i < img.size(); ++i)
    out.data[i] = static_cast<float>((img.data[i] - mean) * inv_std);
  return out;
}

// Concrete parameter draw for one augmentation; applied in the fixed
// order flip -> rotate -> zoom -> shift.
struct AugmentDraws {
  bool flip = false;
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;

  bool is_identity() const {
    return !flip && rotation_deg == 0.0 && zoom == 1.0 && shift_x == 0.0 &&
           shift_y == 0.0;
  }
};

// Parameters are a pure function of (seed, epoch, sample index), so the
// batch stream is reproducible no matter how work is scheduled.
inline AugmentDraws draw_augment(const AugmentConfig& cfg, uint64_t epoch,
                                 int64_t sample_index, int64_t h, int64_t w) {
  Rng rng(mix_seed(cfg.seed, epoch, static_cast<uint64_t>(sample_index)));
  AugmentDraws d;
  bool flip_draw = bernoulli_draw(rng, 0.5);
  d.flip = cfg.horizontal_flip && flip_draw;
  d.rotation_deg = uniform_draw(rng, -cfg.rotation_max_deg, cfg.rotation_max_deg);
  d.zoom = uniform_draw(rng, 1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range);
  d.shift_x = uniform_draw(rng, -cfg.width_shift, cfg.width_shift) * static_cast<double>(w);
  d.shift_y = uniform_draw(rng, -cfg.height_shift, cfg.height_shift) * static_cast<double>(h);
  return d;
}

inline Tensor<float> apply_augment(const Tensor<float>& img, const AugmentDraws& d,
                                   FillMode fill) {
  if (img.shape.rank() != 3 || img.shape[2] != 3)
    fail(ErrorKind::shape, "augment expects [H,W,3] input, got " + img.shape.str());
  if (d.is_identity()) return img;

  const int64_t h = img.shape[0], w = img.shape[1];
  const double cy = static_cast<double>(h - 1) / 2.0;
  const double cx = static_cast<double>(w - 1) / 2.0;
  const double theta = d.rotation_deg * 3.14159265358979323846 / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);

  Tensor<float> out(img.shape);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      // Invert the output-space transform step by step: shift, zoom,
      // rotation (all about the image center), then the flip.
      double px = static_cast<double>(x) - d.shift_x;
      double py = static_cast<double>(y) - d.shift_y;
      px = cx + (px - cx) / d.zoom;
      py = cy + (py - cy) / d.zoom;
      double rx = cx + (px - cx) * cos_t - (py - cy) * sin_t;
      double ry = cy + (px - cx) * sin_t + (py - cy) * cos_t;
      if (d.flip) rx = static_cast<double>(w - 1) - rx;
      for (int64_t c = 0; c < 3; ++c)
        out.at(y, x, c) = detail::sample_bilinear(img, ry, rx, c, fill);
    }
  return out;
}

inline Tensor<float> augment(const Tensor<float>& img, const AugmentConfig& cfg,
                             uint64_t epoch, int64_t sample_index) {
  cfg.validate();
  auto draws = draw_augment(cfg, epoch, sample_index, img.shape[0], img.shape[1]);
  return apply_augment(img, draws, cfg.fill_mode);
}

// --- batches ----------------------------------------------------------------

struct PipelineConfig {
  int64_t image_side = 363;
  float rescale_factor = 1.0f / 255.0f;
  bool standardize = false;
  AugmentConfig augment;
};

// Sequence of mini-batches over a dataset: ceil(n/batch_size) batches per
// epoch, the last possibly short. Training streams shuffle per epoch with
// a seed derived from (shuffle_seed, epoch) and apply augmentation;
// evaluation streams keep dataset order and never augment. Augmentation
// draws are keyed by position in the dataset, not by batch order.
class BatchStream {
 public:
  BatchStream(const Dataset& dataset, const PipelineConfig& cfg, int64_t batch_size,
              uint64_t shuffle_seed, uint64_t epoch, bool training)
      : dataset_(dataset), cfg_(cfg), batch_size_(batch_size), epoch_(epoch),
        training_(training) {
    if (dataset.size() == 0) fail(ErrorKind::input, "dataset is empty");
    if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
    cfg.augment.validate();
    order_.resize(dataset.size());
    for (int64_t i = 0; i < dataset.size(); ++i) order_[i] = i;
    if (training)
      seeded_shuffle(order_.begin(), order_.end(), mix_seed(shuffle_seed, epoch));
  }

  int64_t batch_count() const {
    return (dataset_.size() + batch_size_ - 1) / batch_size_;
  }

  std::optional<Batch> next() {
    if (cursor_ >= dataset_.size()) return std::nullopt;
    const int64_t b = std::min(batch_size_, dataset_.size() - cursor_);
    const int64_t s = cfg_.image_side;
    const int64_t k = dataset_.class_count();

    Batch batch{Tensor<float>({b, s, s, 3}), Tensor<float>({b, k})};
    for (int64_t row = 0; row < b; ++row) {
      int64_t index = order_[cursor_ + row];
      const Sample& sample = dataset_.samples[index];
      Tensor<float> img = resize_bilinear(sample.image, s);
      img = rescale(img, cfg_.rescale_factor);
      if (training_) img = augment(img, cfg_.augment, epoch_, index);
      if (cfg_.standardize) img = standardize(img);
      std::copy(img.data.begin(), img.data.end(),
                batch.images.data.begin() + row * s * s * 3);
      batch.labels_onehot.at(row, sample.label) = 1.0f;
    }
    cursor_ += b;
    return batch;
  }

 private:
  const Dataset& dataset_;
  PipelineConfig cfg_;
  int64_t batch_size_;
  uint64_t epoch_;
  bool training_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

// --- split manifest ----------------------------------------------------------

struct SplitManifest {
  std::string root;  // dataset tree the relative paths resolve against
  std::vector<std::string> classes;
  std::vector<std::string> train_paths;
  std::vector<std::string> val_paths;
  uint64_t seed = 0;
  double ratio = 0.8;
};

inline SplitManifest make_split_manifest(const std::string& root, const Dataset& train,
                                         const Dataset& val, uint64_t seed, double ratio) {
  SplitManifest m;
  m.root = root;
  m.classes = train.classes;
  m.seed = seed;
  m.ratio = ratio;
  for (const auto& s : train.samples) m.train_paths.push_back(s.source_path);
  for (const auto& s : val.samples) m.val_paths.push_back(s.source_path);
  return m;
}

inline void write_split_manifest(const std::filesystem::path& path,
                                 const SplitManifest& m) {
  nlohmann::json j;
  j["root"] = m.root;
  j["classes"] = m.classes;
  j["train"] = m.train_paths;
  j["val"] = m.val_paths;
  j["seed"] = m.seed;
  j["ratio"] = m.ratio;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorKind::io, "cannot write split manifest '" + path.string() + "'");
}

inline SplitManifest read_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open split manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    SplitManifest m;
    m.root = j.at("root").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.train_paths = j.at("train").get<std::vector<std::string>>();
    m.val_paths = j.at("val").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<uint64_t>();
    m.ratio = j.at("ratio").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, "malformed split manifest '" + path.string() + "': " + e.what());
  }
}

// Loads the referenced samples; labels come from the class directory
// component of each relative path.
inline Dataset load_split(const std::filesystem::path& root,
                          const std::vector<std::string>& classes,
                          const std::vector<std::string>& rel_paths) {
  Dataset d;
  d.classes = classes;
  for (const auto& rel : rel_paths) {
    auto slash = rel.find('/');
    if (slash == std::string::npos)
      fail(ErrorKind::input, "manifest path '" + rel + "' has no class component");
    std::string cls = rel.substr(0, slash);
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end())
      fail(ErrorKind::input, "manifest path '" + rel + "' references unknown class");
    Sample s;
    s.image = decode_image((root / rel).string());
    s.label = it - classes.begin();
    s.source_path = rel;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace statecnn
