#pragma once

// Two-stage transfer-learning protocol: stage 1 trains the head with the
// backbone frozen, stage 2 restarts from the best stage-1 checkpoint,
// unfreezes the top backbone units, and fine-tunes with a fresh
// optimizer. Every epoch writes one checkpoint; the best record is the
// minimum under (val_loss asc, val_acc desc, epoch asc).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "statecnn/data.hpp"
#include "statecnn/model.hpp"
#include "statecnn/optim.hpp"

namespace statecnn {

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double lr = 1e-3;
  double momentum = 0.9;  // sgd
  double decay = 1e-6;    // sgd
  double rho = 0.9;       // rmsprop
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;   // adam
  double epsilon = 1e-7;  // rmsprop/adam

  static OptimizerConfig stage1_default() {
    OptimizerConfig c;
    c.kind = OptimizerKind::rmsprop;
    c.lr = 1e-3;
    return c;
  }
  static OptimizerConfig stage2_default() {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    c.lr = 1e-4;
    c.decay = 1e-6;
    c.momentum = 0.9;
    return c;
  }
};

inline std::unique_ptr<Optimizer<float>> make_optimizer(const OptimizerConfig& c) {
  switch (c.kind) {
    case OptimizerKind::sgd:
      return std::make_unique<Sgd<float>>(SgdOptions<float>{
          static_cast<float>(c.lr), static_cast<float>(c.momentum),
          static_cast<float>(c.decay)});
    case OptimizerKind::rmsprop:
      return std::make_unique<Rmsprop<float>>(RmspropOptions<float>{
          static_cast<float>(c.lr), static_cast<float>(c.rho),
          static_cast<float>(c.epsilon)});
    case OptimizerKind::adam:
      return std::make_unique<Adam<float>>(AdamOptions<float>{
          static_cast<float>(c.lr), static_cast<float>(c.beta1),
          static_cast<float>(c.beta2), static_cast<float>(c.epsilon)});
  }
  fail(ErrorKind::internal, "unhandled optimizer kind");
}

struct StageConfig {
  OptimizerConfig optimizer;
  int epochs = 100;
  int unfreeze_top_k = 4;  // stage 2 only
};

struct TrainConfig {
  StageConfig stage1{OptimizerConfig::stage1_default(), 100, 0};
  StageConfig stage2{OptimizerConfig::stage2_default(), 100, 4};
  int64_t batch_size = 32;
  uint64_t master_seed = 0;
  PipelineConfig pipeline;
  std::string output_dir = ".";
  bool keep_all_checkpoints = true;
  std::vector<std::string> class_names;
};

struct EpochMetrics {
  int stage = 1;
  int epoch = 1;  // 1-based within the stage
  double train_loss = 0, train_acc = 0;
  double val_loss = 0, val_acc = 0;
  std::string checkpoint_path;
};

// The unique record first under (val_loss asc, val_acc desc, epoch asc);
// list order never matters.
inline const EpochMetrics& select_best(const std::vector<EpochMetrics>& history) {
  if (history.empty()) fail(ErrorKind::input, "select_best on empty history");
  const EpochMetrics* best = &history[0];
  for (const auto& m : history) {
    if (m.val_loss < best->val_loss ||
        (m.val_loss == best->val_loss &&
         (m.val_acc > best->val_acc ||
          (m.val_acc == best->val_acc && m.epoch < best->epoch))))
      best = &m;
  }
  return *best;
}

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

inline EvalResult evaluate(ModelGraph<float>& model, const Dataset& dataset,
                           const PipelineConfig& pipeline, int64_t batch_size = 32) {
  if (dataset.size() == 0) fail(ErrorKind::input, "evaluate on empty dataset");
  if (dataset.class_count() != model.classes())
    fail(ErrorKind::config, "dataset has " + std::to_string(dataset.class_count()) +
                                " classes, model expects " + std::to_string(model.classes()));
  const int64_t k = model.classes();
  EvalResult r;
  r.confusion.assign(k, std::vector<int64_t>(k, 0));

  BatchStream stream(dataset, pipeline, batch_size, 0, 0, false);
  double loss_weighted = 0;
  int64_t correct = 0, seen = 0;
  while (auto batch = stream.next()) {
    auto probs = model.forward(batch->images, Phase::inference);
    auto loss = categorical_crossentropy(probs, batch->labels_onehot);
    const int64_t b = probs.shape[0];
    loss_weighted += static_cast<double>(loss.loss) * static_cast<double>(b);
    for (int64_t i = 0; i < b; ++i) {
      Tensor<float> row({k});
      Tensor<float> labels({k});
      for (int64_t j = 0; j < k; ++j) {
        row.data[j] = probs.at(i, j);
        labels.data[j] = batch->labels_onehot.at(i, j);
      }
      int64_t predicted = argmax(row);
      int64_t truth = argmax(labels);
      r.confusion[truth][predicted] += 1;
      if (predicted == truth) ++correct;
    }
    seen += b;
  }
  r.loss = loss_weighted / static_cast<double>(seen);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
  return r;
}

namespace detail {

inline std::string checkpoint_name(int stage, int epoch) {
  std::ostringstream os;
  os << "stage" << stage << "_epoch" << std::setfill('0') << std::setw(3) << epoch
     << ".ckpt";
  return os.str();
}

struct StageOutcome {
  std::vector<EpochMetrics> history;
  EpochMetrics best;
};

// One stage of the training loop: per epoch, iterate shuffled training
// batches (forward -> loss -> backward -> optimizer step), evaluate on
// the validation split, checkpoint, and log.
inline StageOutcome run_stage(ModelGraph<float>& model, const Dataset& train,
                              const Dataset& val, const TrainConfig& cfg, int stage,
                              std::ostream* log) {
  namespace fs = std::filesystem;
  if (train.class_count() != model.classes())
    fail(ErrorKind::config, "dataset has " + std::to_string(train.class_count()) +
                                " classes, model expects " +
                                std::to_string(model.classes()));
  const StageConfig& stage_cfg = stage == 1 ? cfg.stage1 : cfg.stage2;
  fs::create_directories(cfg.output_dir);

  auto optimizer = make_optimizer(stage_cfg.optimizer);
  model.reset_streams();
  auto slots = model.all_slots();

  StageOutcome out;
  for (int epoch = 1; epoch <= stage_cfg.epochs; ++epoch) {
    BatchStream stream(train, cfg.pipeline, cfg.batch_size,
                       mix_seed(cfg.master_seed, static_cast<uint64_t>(stage)),
                       static_cast<uint64_t>(epoch - 1), true);
    double loss_weighted = 0;
    int64_t correct = 0, seen = 0;
    while (auto batch = stream.next()) {
      auto probs = model.forward(batch->images, Phase::training);
      auto loss = categorical_crossentropy(probs, batch->labels_onehot);
      model.backward(loss.d_probs);
      optimizer->step(slots);

      const int64_t b = probs.shape[0];
      loss_weighted += static_cast<double>(loss.loss) * static_cast<double>(b);
      const int64_t k = model.classes();
      for (int64_t i = 0; i < b; ++i) {
        int64_t predicted = 0, truth = 0;
        for (int64_t j = 1; j < k; ++j)
          if (probs.at(i, j) > probs.at(i, predicted)) predicted = j;
        for (int64_t j = 0; j < k; ++j)
          if (batch->labels_onehot.at(i, j) == 1.0f) truth = j;
        if (predicted == truth) ++correct;
      }
      seen += b;
    }

    EpochMetrics m;
    m.stage = stage;
    m.epoch = epoch;
    m.train_loss = loss_weighted / static_cast<double>(seen);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    auto val_result = evaluate(model, val, cfg.pipeline, cfg.batch_size);
    m.val_loss = val_result.loss;
    m.val_acc = val_result.accuracy;

    CheckpointInfo info;
    info.stage = stage;
    info.epoch = epoch;
    info.train_loss = m.train_loss;
    info.train_acc = m.train_acc;
    info.val_loss = m.val_loss;
    info.val_acc = m.val_acc;
    info.class_names = cfg.class_names.empty() ? train.classes : cfg.class_names;
    info.image_side = cfg.pipeline.image_side;
    info.rescale_factor = cfg.pipeline.rescale_factor;
    info.standardize = cfg.pipeline.standardize;
    m.checkpoint_path = (fs::path(cfg.output_dir) / checkpoint_name(stage, epoch)).string();
    save_checkpoint(model, m.checkpoint_path, info);

    if (log) {
      *log << "stage " << stage << " epoch " << std::setw(3) << epoch << "  "
           << std::fixed << std::setprecision(6) << "train_loss " << m.train_loss
           << "  train_acc " << m.train_acc << "  val_loss " << m.val_loss
           << "  val_acc " << m.val_acc << "\n";
      log->flush();
    }
    out.history.push_back(std::move(m));
  }

  out.best = select_best(out.history);
  if (!cfg.keep_all_checkpoints) {
    for (const auto& m : out.history)
      if (m.checkpoint_path != out.best.checkpoint_path)
        fs::remove(m.checkpoint_path);
  }
  return out;
}

}  // namespace detail

// Stage 1: backbone fully frozen, head trained from its initialization.
inline detail::StageOutcome run_stage1(ModelGraph<float>& model, const Dataset& train,
                                       const Dataset& val, const TrainConfig& cfg,
                                       std::ostream* log = nullptr) {
  model.freeze_backbone_all();
  return detail::run_stage(model, train, val, cfg, 1, log);
}

// Stage 2: restarts from the selected stage-1 checkpoint, unfreezes the
// top k backbone units, and fine-tunes with a fresh optimizer.
inline detail::StageOutcome run_stage2(ModelGraph<float>& model,
                                       const std::string& stage1_checkpoint,
                                       const Dataset& train, const Dataset& val,
                                       const TrainConfig& cfg,
                                       std::ostream* log = nullptr) {
  if (!std::filesystem::exists(stage1_checkpoint))
    fail(ErrorKind::state, "stage-2 needs a stage-1 checkpoint; '" + stage1_checkpoint +
                               "' does not exist");
  load_checkpoint(model, stage1_checkpoint);
  model.freeze_backbone_all();
  model.unfreeze_backbone_top(cfg.stage2.unfreeze_top_k);
  return detail::run_stage(model, train, val, cfg, 2, log);
}

// --- metric export ------------------------------------------------------------

inline void export_metrics_csv(const std::vector<EpochMetrics>& history,
                               const std::filesystem::path& csv_path) {
  if (history.empty()) fail(ErrorKind::input, "no metrics to export");
  std::ofstream out(csv_path);
  if (!out) fail(ErrorKind::io, "cannot write '" + csv_path.string() + "'");
  out << "epoch,stage,train_loss,train_acc,val_loss,val_acc\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& m : history)
    out << m.epoch << "," << m.stage << "," << m.train_loss << "," << m.train_acc << ","
        << m.val_loss << "," << m.val_acc << "\n";
  if (!out) fail(ErrorKind::io, "cannot write '" + csv_path.string() + "'");
}

namespace detail {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // x = global row index
};

inline void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                            const std::vector<Series>& series, double y_min, double y_max) {
  const double width = 720, height = 440;
  const double ml = 60, mr = 160, mt = 40, mb = 50;
  double x_max = 1;
  for (const auto& s : series)
    for (auto& p : s.points) x_max = std::max(x_max, p.first);
  if (y_max <= y_min) y_max = y_min + 1;

  auto map_x = [&](double x) { return ml + (x - 1) / std::max(1.0, x_max - 1) * (width - ml - mr); };
  auto map_y = [&](double y) { return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb); };

  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "  <text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  out << "  <line x1=\"" << ml << "\" y1=\"" << map_y(y_min) << "\" x2=\"" << (width - mr)
      << "\" y2=\"" << map_y(y_min) << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << ml << "\" y1=\"" << map_y(y_min) << "\" x2=\"" << ml
      << "\" y2=\"" << map_y(y_max) << "\" stroke=\"black\"/>\n";
  out << std::fixed << std::setprecision(2);
  out << "  <text x=\"8\" y=\"" << map_y(y_min) << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << y_min << "</text>\n";
  out << "  <text x=\"8\" y=\"" << (map_y(y_max) + 10) << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << y_max << "</text>\n";

  int legend_row = 0;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    out << "  <polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    out << std::setprecision(2);
    for (const auto& p : s.points) out << map_x(p.first) << "," << map_y(p.second) << " ";
    out << "\"/>\n";
    double ly = mt + 16.0 * legend_row++;
    out << "  <line x1=\"" << (width - mr + 10) << "\" y1=\"" << ly << "\" x2=\""
        << (width - mr + 34) << "\" y2=\"" << ly << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    out << "  <text x=\"" << (width - mr + 40) << "\" y=\"" << (ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

}  // namespace detail

// CSV plus two SVG line charts (accuracy and loss, training and
// validation series per stage present in the history).
inline void export_metrics(const std::vector<EpochMetrics>& history,
                           const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  export_metrics_csv(history, out_dir / "metrics.csv");

  auto build = [&](auto pick_train, auto pick_val) {
    std::vector<detail::Series> series;
    const char* colors[4] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
    for (int stage : {1, 2}) {
      detail::Series train_s{"stage " + std::to_string(stage) + " train",
                             colors[(stage - 1) * 2], {}};
      detail::Series val_s{"stage " + std::to_string(stage) + " val",
                           colors[(stage - 1) * 2 + 1], {}};
      double x = 0;
      for (size_t i = 0; i < history.size(); ++i) {
        x = static_cast<double>(i + 1);
        if (history[i].stage != stage) continue;
        train_s.points.emplace_back(x, pick_train(history[i]));
        val_s.points.emplace_back(x, pick_val(history[i]));
      }
      if (!train_s.points.empty()) series.push_back(std::move(train_s));
      if (!val_s.points.empty()) series.push_back(std::move(val_s));
    }
    return series;
  };

  auto acc_series = build([](const EpochMetrics& m) { return m.train_acc; },
                          [](const EpochMetrics& m) { return m.val_acc; });
  detail::write_svg_chart(out_dir / "accuracy.svg", "Accuracy per epoch", acc_series, 0.0, 1.0);

  double max_loss = 0;
  for (const auto& m : history) max_loss = std::max({max_loss, m.train_loss, m.val_loss});
  auto loss_series = build([](const EpochMetrics& m) { return m.train_loss; },
                           [](const EpochMetrics& m) { return m.val_loss; });
  detail::write_svg_chart(out_dir / "loss.svg", "Loss per epoch", loss_series, 0.0,
                          max_loss * 1.05);
}

}  // namespace statecnn
