#pragma once

// The classifier head composed over a pluggable frozen backbone, with
// whole-network forward/backward, trainability policies, summary tables,
// and the binary checkpoint format.

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "statecnn/layers.hpp"

namespace statecnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

// --- backbone interface -----------------------------------------------------
//
// A feature extractor whose output feeds the head. Units are the
// freezable granularity; unit 0 is nearest the input and "top k" means
// the k units nearest the output.
template <typename T>
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::string kind() const = 0;
  // Name of the feature attachment point, used as the "connected to"
  // anchor in summaries.
  virtual std::string feature_name() const = 0;

  virtual int64_t out_channels() const = 0;
  virtual int64_t out_spatial() const = 0;

  virtual Shape output_shape(const Shape& images) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& images, Phase phase) = 0;
  virtual void backward(const Tensor<T>& d_features) = 0;

  virtual int unit_count() const = 0;
  virtual void set_unit_trainable(int unit, bool trainable) = 0;
  virtual bool unit_trainable(int unit) const = 0;

  // Slots labeled with the owning unit layer name, in serialization order.
  virtual std::vector<std::pair<std::string, ParamSlot<T>*>> named_params() = 0;

  std::vector<ParamSlot<T>*> params() {
    std::vector<ParamSlot<T>*> out;
    for (auto& [name, slot] : named_params()) out.push_back(slot);
    return out;
  }

  // Parameter count reported in summaries; equals the real slot total for
  // trainable stubs and the declared figure for shape-only stubs.
  virtual int64_t declared_param_count() const = 0;

  virtual nlohmann::json describe() const = 0;
};

namespace detail {

inline uint64_t fnv1a(const void* data, size_t bytes, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// Stand-in for a pretrained feature extractor: emits seeded pseudorandom
// features of the contract shape [N,10,10,channels]. Features are a pure
// function of (seed, sample content). Declares a parameter count for
// summaries but owns no real parameters.
template <typename T>
class ShapeOnlyBackbone : public Backbone<T> {
 public:
  ShapeOnlyBackbone(int64_t declared_params, uint64_t seed, int64_t channels = 2048)
      : declared_params_(declared_params), seed_(seed), channels_(channels) {}

  std::string kind() const override { return "shape_only"; }
  std::string feature_name() const override { return "mixed10"; }
  int64_t out_channels() const override { return channels_; }
  int64_t out_spatial() const override { return 10; }

  Shape output_shape(const Shape& images) const override {
    check_images(images);
    return Shape({images[0], 10, 10, channels_});
  }

  Tensor<T> forward(const Tensor<T>& images, Phase) override {
    check_images(images.shape);
    Tensor<T> features({images.shape[0], 10, 10, channels_});
    const int64_t per_sample = images.size() / images.shape[0];
    const int64_t feat_per_sample = 100 * channels_;
    for (int64_t i = 0; i < images.shape[0]; ++i) {
      uint64_t content = detail::fnv1a(&images.data[i * per_sample],
                                       static_cast<size_t>(per_sample) * sizeof(T));
      Rng rng(mix_seed(seed_, content));
      T* dst = &features.data[i * feat_per_sample];
      for (int64_t j = 0; j < feat_per_sample; ++j)
        dst[j] = static_cast<T>(uniform_draw(rng, -1.0, 1.0));
    }
    return features;
  }

  void backward(const Tensor<T>&) override {}

  int unit_count() const override { return 0; }
  void set_unit_trainable(int, bool) override {
    fail(ErrorKind::config, "shape_only backbone has no trainable units");
  }
  bool unit_trainable(int) const override { return false; }

  std::vector<std::pair<std::string, ParamSlot<T>*>> named_params() override { return {}; }
  int64_t declared_param_count() const override { return declared_params_; }

  nlohmann::json describe() const override {
    return {{"kind", "shape_only"},
            {"declared_params", declared_params_},
            {"channels", channels_},
            {"seed", seed_}};
  }

 private:
  void check_images(const Shape& s) const {
    if (s.rank() != 4 || s[3] != 3)
      fail(ErrorKind::shape, "backbone expects [N,H,W,3] images, got " + s.str());
  }

  int64_t declared_params_;
  uint64_t seed_;
  int64_t channels_;
};

// Small real convolutional stack for fine-tuning tests: a fixed mean-pool
// stem down to 10x10 followed by `units` conv3x3+relu blocks, each block
// one freezable unit.
template <typename T>
class TinyTrainableBackbone : public Backbone<T> {
 public:
  TinyTrainableBackbone(int units, int64_t channels, uint64_t seed)
      : channels_(channels), seed_(seed) {
    if (units < 1) fail(ErrorKind::config, "tiny backbone needs at least 1 unit");
    for (int u = 0; u < units; ++u) {
      int64_t cin = u == 0 ? 3 : channels;
      convs_.push_back(std::make_unique<Conv2d<T>>("unit_" + std::to_string(u + 1) + "/conv",
                                                   3, 3, cin, channels, 1, Padding::same,
                                                   mix_seed(seed, static_cast<uint64_t>(u))));
      relus_.push_back(std::make_unique<Relu<T>>("unit_" + std::to_string(u + 1) + "/relu"));
    }
  }

  std::string kind() const override { return "tiny_trainable"; }
  std::string feature_name() const override { return "tiny_backbone"; }
  int64_t out_channels() const override { return channels_; }
  int64_t out_spatial() const override { return 10; }

  Shape output_shape(const Shape& images) const override {
    check_images(images);
    return Shape({images[0], 10, 10, channels_});
  }

  Tensor<T> forward(const Tensor<T>& images, Phase phase) override {
    check_images(images.shape);
    Tensor<T> x = stem_pool(images);
    for (size_t u = 0; u < convs_.size(); ++u) {
      x = convs_[u]->forward(x, phase);
      x = relus_[u]->forward(x, phase);
    }
    return x;
  }

  void backward(const Tensor<T>& d_features) override {
    int lowest_trainable = -1;
    for (int u = 0; u < unit_count(); ++u)
      if (unit_trainable(u)) {
        lowest_trainable = u;
        break;
      }
    if (lowest_trainable < 0) return;
    Tensor<T> d = d_features;
    for (int u = unit_count() - 1; u >= lowest_trainable; --u) {
      d = relus_[u]->backward(d);
      d = convs_[u]->backward(d);
    }
  }

  int unit_count() const override { return static_cast<int>(convs_.size()); }

  void set_unit_trainable(int unit, bool trainable) override {
    if (unit < 0 || unit >= unit_count())
      fail(ErrorKind::config, "backbone unit index out of range");
    for (auto* slot : convs_[unit]->params()) slot->trainable = trainable;
  }

  bool unit_trainable(int unit) const override {
    return convs_[unit]->params().front()->trainable;
  }

  std::vector<std::pair<std::string, ParamSlot<T>*>> named_params() override {
    std::vector<std::pair<std::string, ParamSlot<T>*>> all;
    for (auto& conv : convs_)
      for (auto* slot : conv->params()) all.emplace_back(conv->name(), slot);
    return all;
  }

  int64_t declared_param_count() const override {
    int64_t total = 0;
    for (auto& conv : convs_)
      for (auto* slot : conv->params()) total += slot->value.size();
    return total;
  }

  nlohmann::json describe() const override {
    return {{"kind", "tiny_trainable"},
            {"units", unit_count()},
            {"channels", channels_},
            {"seed", seed_}};
  }

 private:
  void check_images(const Shape& s) const {
    if (s.rank() != 4 || s[3] != 3)
      fail(ErrorKind::shape, "backbone expects [N,H,W,3] images, got " + s.str());
    if (s[1] < 10 || s[2] < 10)
      fail(ErrorKind::shape, "tiny backbone needs spatial extents >= 10, got " + s.str());
  }

  // Mean pool with integer window boundaries onto a 10x10 grid. The stem
  // has no parameters and never needs an image gradient, so it has no
  // backward path.
  Tensor<T> stem_pool(const Tensor<T>& images) const {
    const int64_t n = images.shape[0], h = images.shape[1], w = images.shape[2];
    const int64_t s = 10;
    Tensor<T> out({n, s, s, 3});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t oy = 0; oy < s; ++oy) {
        int64_t y0 = oy * h / s, y1 = (oy + 1) * h / s;
        for (int64_t ox = 0; ox < s; ++ox) {
          int64_t x0 = ox * w / s, x1 = (ox + 1) * w / s;
          for (int64_t c = 0; c < 3; ++c) {
            double acc = 0;
            for (int64_t y = y0; y < y1; ++y)
              for (int64_t x = x0; x < x1; ++x) acc += images.at(i, y, x, c);
            out.at(i, oy, ox, c) =
                static_cast<T>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
          }
        }
      }
    return out;
  }

  int64_t channels_;
  uint64_t seed_;
  std::vector<std::unique_ptr<Conv2d<T>>> convs_;
  std::vector<std::unique_ptr<Relu<T>>> relus_;
};

template <typename T>
std::shared_ptr<Backbone<T>> backbone_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "shape_only")
    return std::make_shared<ShapeOnlyBackbone<T>>(j.at("declared_params").get<int64_t>(),
                                                  j.at("seed").get<uint64_t>(),
                                                  j.value("channels", int64_t(2048)));
  if (kind == "tiny_trainable")
    return std::make_shared<TinyTrainableBackbone<T>>(j.at("units").get<int>(),
                                                      j.at("channels").get<int64_t>(),
                                                      j.at("seed").get<uint64_t>());
  fail(ErrorKind::config, "unknown backbone kind '" + kind + "'");
}

// --- model graph --------------------------------------------------------------
//
// The head is the fixed sequence per block count (default 2 blocks,
// 16 layers): [conv -> batchnorm -> relu -> maxpool] x blocks -> flatten
// -> dense(32) -> batchnorm -> relu -> dropout -> dense(K) -> batchnorm
// -> softmax.
template <typename T>
class ModelGraph {
 public:
  ModelGraph(int64_t classes, std::shared_ptr<Backbone<T>> backbone, double dropout_rate,
             uint64_t seed, int head_blocks = 2)
      : classes_(classes),
        backbone_(std::move(backbone)),
        dropout_rate_(dropout_rate),
        seed_(seed),
        head_blocks_(head_blocks) {
    if (classes < 2) fail(ErrorKind::config, "model needs at least 2 classes");
    if (head_blocks < 1 || head_blocks > 2)
      fail(ErrorKind::config, "head supports 1 or 2 conv blocks");

    Shape probe({1, backbone_->out_spatial(), backbone_->out_spatial(),
                 backbone_->out_channels()});
    int64_t cin = backbone_->out_channels();
    uint64_t salt = 0;
    for (int b = 0; b < head_blocks; ++b) {
      int64_t cout = b == 0 ? 32 : 64;
      std::string suffix = std::to_string(95 + b);
      push(std::make_unique<Conv2d<T>>("conv2d_" + suffix, 3, 3, cin, cout, 1,
                                       Padding::same, mix_seed(seed, salt++)),
           probe);
      push(std::make_unique<BatchNorm<T>>("batch_normalization_" + suffix, cout), probe);
      push(std::make_unique<Relu<T>>("activation_" + suffix), probe);
      push(std::make_unique<MaxPool2d<T>>("max_pooling2d_" + std::to_string(5 + b), 2, 2, 2),
           probe);
      cin = cout;
    }
    push(std::make_unique<Flatten<T>>("flatten_1"), probe);
    int64_t flat_width = probe[1];
    push(std::make_unique<Dense<T>>("dense_1", flat_width, 32, mix_seed(seed, salt++)), probe);
    push(std::make_unique<BatchNorm<T>>("batch_normalization_" + std::to_string(95 + head_blocks), 32),
         probe);
    push(std::make_unique<Relu<T>>("activation_" + std::to_string(95 + head_blocks)), probe);
    push(std::make_unique<Dropout<T>>("dropout_1", dropout_rate, mix_seed(seed, salt++)), probe);
    push(std::make_unique<Dense<T>>("dense_2", 32, classes, mix_seed(seed, salt++)), probe);
    push(std::make_unique<BatchNorm<T>>("batch_normalization_" + std::to_string(96 + head_blocks),
                                        classes),
         probe);
    push(std::make_unique<Softmax<T>>("activation_" + std::to_string(96 + head_blocks)), probe);
  }

  Tensor<T> forward(const Tensor<T>& images, Phase phase) {
    Tensor<T> x = backbone_->forward(images, phase);
    for (auto& layer : head_) x = layer->forward(x, phase);
    return x;
  }

  void backward(const Tensor<T>& d_probs) {
    Tensor<T> d = d_probs;
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) d = (*it)->backward(d);
    backbone_->backward(d);
  }

  void freeze_backbone_all() {
    for (int u = 0; u < backbone_->unit_count(); ++u)
      backbone_->set_unit_trainable(u, false);
  }

  // "Top k" counts from the output end of the backbone's unit list.
  void unfreeze_backbone_top(int k) {
    const int n = backbone_->unit_count();
    if (k < 0 || k > n)
      fail(ErrorKind::config, "unfreeze_backbone_top(" + std::to_string(k) +
                                  ") out of range for " + std::to_string(n) + " units");
    for (int u = 0; u < n; ++u) backbone_->set_unit_trainable(u, u >= n - k);
  }

  std::vector<ParamSlot<T>*> all_slots() {
    std::vector<ParamSlot<T>*> slots = backbone_->params();
    for (auto& layer : head_)
      for (auto* slot : layer->params()) slots.push_back(slot);
    return slots;
  }

  std::vector<ParamSlot<T>*> trainable_slots() {
    std::vector<ParamSlot<T>*> slots;
    for (auto* slot : all_slots())
      if (slot->trainable) slots.push_back(slot);
    return slots;
  }

  void reset_streams() {
    for (auto& layer : head_) layer->reset_stream();
  }

  Backbone<T>& backbone() { return *backbone_; }
  std::shared_ptr<Backbone<T>> backbone_ptr() { return backbone_; }
  const std::vector<std::unique_ptr<Layer<T>>>& head() const { return head_; }
  std::vector<std::unique_ptr<Layer<T>>>& head() { return head_; }
  int64_t classes() const { return classes_; }
  double dropout_rate() const { return dropout_rate_; }
  uint64_t seed() const { return seed_; }
  int head_blocks() const { return head_blocks_; }

  nlohmann::json describe() const {
    return {{"classes", classes_},
            {"dropout", dropout_rate_},
            {"head_blocks", head_blocks_},
            {"seed", seed_},
            {"backbone", backbone_->describe()}};
  }

 private:
  void push(std::unique_ptr<Layer<T>> layer, Shape& probe) {
    probe = layer->output_shape(probe);
    head_.push_back(std::move(layer));
  }

  int64_t classes_;
  std::shared_ptr<Backbone<T>> backbone_;
  double dropout_rate_;
  uint64_t seed_;
  int head_blocks_;
  std::vector<std::unique_ptr<Layer<T>>> head_;
};

template <typename T>
ModelGraph<T> model_from_json(const nlohmann::json& j) {
  return ModelGraph<T>(j.at("classes").get<int64_t>(),
                       backbone_from_json<T>(j.at("backbone")),
                       j.at("dropout").get<double>(), j.at("seed").get<uint64_t>(),
                       j.value("head_blocks", 2));
}

// --- summary -------------------------------------------------------------------

struct SummaryRow {
  std::string name;
  std::string type;
  std::string output_shape;
  int64_t params = 0;
  std::string connected_to;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  int64_t total = 0;
  int64_t trainable = 0;
  int64_t non_trainable = 0;

  std::string str() const {
    size_t name_w = 20, shape_w = 14;
    for (const auto& r : rows) {
      name_w = std::max(name_w, r.name.size() + r.type.size() + 3);
      shape_w = std::max(shape_w, r.output_shape.size());
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_w + 2)) << "Layer (type)"
       << std::setw(static_cast<int>(shape_w + 2)) << "Output Shape"
       << std::setw(12) << "Param #" << "Connected to\n";
    os << std::string(name_w + shape_w + 16 + 12, '=') << "\n";
    for (const auto& r : rows) {
      os << std::left << std::setw(static_cast<int>(name_w + 2)) << (r.name + " (" + r.type + ")")
         << std::setw(static_cast<int>(shape_w + 2)) << r.output_shape
         << std::setw(12) << r.params << r.connected_to << "\n";
    }
    os << std::string(name_w + shape_w + 16 + 12, '=') << "\n";
    os << "Total params: " << with_commas(total) << "\n";
    os << "Trainable params: " << with_commas(trainable) << "\n";
    os << "Non-trainable params: " << with_commas(non_trainable) << "\n";
    return os.str();
  }
};

namespace detail {

inline std::string display_type(std::string_view kind) {
  if (kind == "conv2d") return "Conv2D";
  if (kind == "batchnorm") return "BatchNormalization";
  if (kind == "relu" || kind == "softmax") return "Activation";
  if (kind == "maxpool2d") return "MaxPooling2D";
  if (kind == "flatten") return "Flatten";
  if (kind == "dense") return "Dense";
  if (kind == "dropout") return "Dropout";
  return std::string(kind);
}

inline std::string shape_with_batch(const Shape& s) {
  std::ostringstream os;
  os << "(None";
  for (int i = 1; i < s.rank(); ++i) os << ", " << s[i];
  os << ")";
  return os.str();
}

}  // namespace detail

template <typename T>
SummaryTable summarize(ModelGraph<T>& m) {
  SummaryTable table;
  auto& bb = m.backbone();

  SummaryRow bb_row;
  bb_row.name = bb.feature_name();
  bb_row.type = bb.kind() + " backbone";
  Shape probe({1, bb.out_spatial(), bb.out_spatial(), bb.out_channels()});
  bb_row.output_shape = detail::shape_with_batch(probe);
  bb_row.params = bb.declared_param_count();
  table.rows.push_back(bb_row);

  int64_t backbone_trainable = 0;
  for (auto* slot : bb.params())
    if (slot->trainable) backbone_trainable += slot->value.size();

  std::string prev = bb.feature_name();
  for (auto& layer : m.head()) {
    SummaryRow row;
    row.name = layer->name();
    row.type = detail::display_type(layer->kind());
    probe = layer->output_shape(probe);
    row.output_shape = detail::shape_with_batch(probe);
    row.params = param_count(*layer).total;
    row.connected_to = prev + "[0][0]";
    table.rows.push_back(row);
    prev = layer->name();
  }

  int64_t head_total = 0, head_trainable = 0;
  for (auto& layer : m.head()) {
    auto c = param_count(*layer);
    head_total += c.total;
    head_trainable += c.trainable;
  }
  table.total = bb.declared_param_count() + head_total;
  table.trainable = backbone_trainable + head_trainable;
  table.non_trainable = table.total - table.trainable;
  return table;
}

// --- checkpoints ------------------------------------------------------------------
//
// File layout: 8-byte magic "SCNNCKPT", u32 version, u64 manifest length,
// UTF-8 JSON manifest, then the payload: every parameter tensor as
// little-endian IEEE-754 single precision, row-major, no padding, in
// manifest entry order. Double-precision models are rounded on save.

inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  int stage = 0;
  int epoch = 0;
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
  std::vector<std::string> class_names;
  // Preprocessing the model was trained with, replayed at prediction time.
  int64_t image_side = 363;
  double rescale_factor = 1.0 / 255.0;
  bool standardize = false;
};

namespace detail {

// Slot enumeration order is the serialization order: backbone slots, then
// head layers in sequence. Layer name resolution for manifest entries.
template <typename T>
std::vector<std::pair<std::string, ParamSlot<T>*>> named_slots(ModelGraph<T>& m) {
  std::vector<std::pair<std::string, ParamSlot<T>*>> out = m.backbone().named_params();
  for (auto& layer : m.head())
    for (auto* slot : layer->params()) out.emplace_back(layer->name(), slot);
  return out;
}

}  // namespace detail

template <typename T>
void save_checkpoint(ModelGraph<T>& m, const std::string& path, const CheckpointInfo& info) {
  auto slots = detail::named_slots(m);

  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["epoch"] = info.epoch;
  manifest["stage"] = info.stage;
  manifest["metrics"] = {{"train_loss", info.train_loss},
                         {"train_acc", info.train_acc},
                         {"val_loss", info.val_loss},
                         {"val_acc", info.val_acc}};
  manifest["classes"] = info.class_names;
  manifest["image_side"] = info.image_side;
  manifest["rescale"] = info.rescale_factor;
  manifest["standardize"] = info.standardize;
  manifest["model"] = m.describe();

  nlohmann::json entries = nlohmann::json::array();
  int64_t offset = 0;
  for (auto& [layer_name, slot] : slots) {
    std::vector<int64_t> dims;
    for (int i = 0; i < slot->value.shape.rank(); ++i) dims.push_back(slot->value.shape[i]);
    int64_t nbytes = slot->value.size() * 4;
    entries.push_back({{"layer", layer_name},
                       {"param", slot->name},
                       {"shape", dims},
                       {"trainable", slot->trainable},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  manifest["entries"] = entries;

  std::string manifest_text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, 8);
  uint32_t version = kCheckpointVersion;
  uint64_t manifest_len = manifest_text.size();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&manifest_len), 8);
  out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
  for (auto& [layer_name, slot] : slots) {
    for (int64_t i = 0; i < slot->value.size(); ++i) {
      float v = static_cast<float>(slot->value.data[i]);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!out) fail(ErrorKind::io, "cannot write checkpoint '" + path + "'");
}

namespace detail {

struct RawCheckpoint {
  nlohmann::json manifest;
  std::vector<float> payload;
};

inline RawCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint '" + path + "'");

  char magic[8];
  uint32_t version = 0;
  uint64_t manifest_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&manifest_len), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    fail(ErrorKind::input, "'" + path + "' is not a checkpoint file");
  if (version != kCheckpointVersion)
    fail(ErrorKind::input, "unsupported checkpoint version " + std::to_string(version));

  std::string manifest_text(manifest_len, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) fail(ErrorKind::input, "truncated checkpoint manifest in '" + path + "'");

  RawCheckpoint raw;
  try {
    raw.manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, "malformed checkpoint manifest: " + std::string(e.what()));
  }

  int64_t expected_bytes = 0;
  for (const auto& entry : raw.manifest.at("entries")) {
    if (entry.at("offset").get<int64_t>() != expected_bytes)
      fail(ErrorKind::input, "checkpoint manifest offsets are not contiguous");
    expected_bytes += entry.at("nbytes").get<int64_t>();
  }
  raw.payload.resize(static_cast<size_t>(expected_bytes) / 4);
  in.read(reinterpret_cast<char*>(raw.payload.data()), expected_bytes);
  if (in.gcount() != expected_bytes)
    fail(ErrorKind::input, "truncated checkpoint payload in '" + path + "'");
  char extra;
  if (in.read(&extra, 1))
    fail(ErrorKind::input, "checkpoint payload longer than manifest declares");
  return raw;
}

}  // namespace detail

inline CheckpointInfo checkpoint_info_from_manifest(const nlohmann::json& manifest) {
  CheckpointInfo info;
  info.epoch = manifest.value("epoch", 0);
  info.stage = manifest.value("stage", 0);
  if (manifest.contains("metrics")) {
    const auto& m = manifest["metrics"];
    info.train_loss = m.value("train_loss", 0.0);
    info.train_acc = m.value("train_acc", 0.0);
    info.val_loss = m.value("val_loss", 0.0);
    info.val_acc = m.value("val_acc", 0.0);
  }
  if (manifest.contains("classes"))
    info.class_names = manifest["classes"].get<std::vector<std::string>>();
  info.image_side = manifest.value("image_side", int64_t(363));
  info.rescale_factor = manifest.value("rescale", 1.0 / 255.0);
  info.standardize = manifest.value("standardize", false);
  return info;
}

// Loads parameter values into an existing model with matching
// architecture. Validation happens before any slot is mutated, so a
// failed load leaves the model untouched.
template <typename T>
CheckpointInfo load_checkpoint(ModelGraph<T>& m, const std::string& path) {
  auto raw = detail::read_checkpoint_file(path);
  auto slots = detail::named_slots(m);
  const auto& entries = raw.manifest.at("entries");
  if (entries.size() != slots.size())
    fail(ErrorKind::input, "checkpoint has " + std::to_string(entries.size()) +
                               " parameter tensors, model expects " +
                               std::to_string(slots.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto& entry = entries[i];
    auto& [layer_name, slot] = slots[i];
    std::string want_layer = entry.at("layer").get<std::string>();
    std::string want_param = entry.at("param").get<std::string>();
    if (want_layer != layer_name || want_param != slot->name)
      fail(ErrorKind::input, "checkpoint entry '" + want_layer + "/" + want_param +
                                 "' does not match model slot '" + layer_name + "/" +
                                 slot->name + "'");
    auto dims = entry.at("shape").get<std::vector<int64_t>>();
    Shape want_shape(dims);
    if (want_shape != slot->value.shape)
      fail(ErrorKind::shape, "checkpoint parameter '" + layer_name + "/" + slot->name +
                                 "' has shape " + want_shape.str() + ", model expects " +
                                 slot->value.shape.str());
    if (entry.at("nbytes").get<int64_t>() != slot->value.size() * 4)
      fail(ErrorKind::input, "checkpoint entry size mismatch for '" + layer_name + "'");
  }

  int64_t cursor = 0;
  for (size_t i = 0; i < slots.size(); ++i) {
    ParamSlot<T>* slot = slots[i].second;
    for (int64_t j = 0; j < slot->value.size(); ++j)
      slot->value.data[j] = static_cast<T>(raw.payload[cursor + j]);
    slot->trainable = entries[i].at("trainable").get<bool>();
    cursor += slot->value.size();
  }
  return checkpoint_info_from_manifest(raw.manifest);
}

// Rebuilds the model architecture recorded in the checkpoint manifest and
// loads the parameters into it.
template <typename T>
std::pair<ModelGraph<T>, CheckpointInfo> load_checkpoint_model(const std::string& path) {
  auto raw = detail::read_checkpoint_file(path);
  ModelGraph<T> model = model_from_json<T>(raw.manifest.at("model"));
  CheckpointInfo info = load_checkpoint(model, path);
  return {std::move(model), info};
}

}  // namespace statecnn
