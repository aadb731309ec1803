#pragma once

#include <optional>
#include <string>
#include <vector>

#include "locrel/config.hpp"
#include "locrel/image.hpp"
#include "locrel/objective.hpp"

namespace locrel::trainer {

struct EpochLog {
  int epoch = 0;  // counted from 0
  double lr = 0.0;
  double train_loss = 0.0;
  double l_ce = 0.0;
  double l_sim = 0.0;
  double l_seg = 0.0;
  double val_acc = 0.0;
  double val_auc = 0.0;
  double val_eer = 0.0;
  bool is_best = false;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_auc = 0.0;
  int best_epoch = -1;
  std::string checkpoint_path;
  std::string metrics_path;
};

/// Full training run over a generated corpus directory. Writes
/// <out_dir>/metrics.jsonl (one JSON line per epoch, no timestamps) and
/// <out_dir>/checkpoint_best.bin (best validation AUC). Deterministic in the
/// config: identical configs give bit-identical logs and checkpoints.
TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir);

/// Evaluates a checkpoint over a corpus (whole manifest). The frequency-cue
/// alpha and the architecture come from the checkpoint header.
objective::EvalReport evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                               int batch_size = 16);

struct AnalyzeResult {
  double y_hat = 0.0;
  std::string mask_path;      // predicted mask as 8-bit PGM
  std::string pattern_csv;    // s_hat
  std::string pattern_image;  // s_hat heatmap
  std::string target_csv;     // target similarity, only when a source is given
};

/// Per-sample dump for one image (optionally paired with its pristine
/// source). Files are written under out_dir.
AnalyzeResult analyze(const std::string& checkpoint_path, const std::string& image_path,
                      const std::optional<std::string>& source_path, const std::string& out_dir);

/// Renders a pattern CSV to its grayscale heatmap image.
void export_heatmap_file(const std::string& csv_path, const std::string& out_image);

/// JSON line for a report (stable field order).
std::string eval_report_json(const objective::EvalReport& report);

}  // namespace locrel::trainer
