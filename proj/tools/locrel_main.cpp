#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "locrel/config.hpp"
#include "locrel/datagen.hpp"
#include "locrel/trainer.hpp"

namespace {

void add_train_options(CLI::App* cmd, locrel::TrainConfig& cfg) {
  cmd->add_option("--alpha", cfg.alpha, "high-pass fraction for the frequency cue");
  cmd->add_option("--k", cfg.k, "patch grid side");
  cmd->add_option("--lambda1", cfg.lambda1, "similarity loss weight");
  cmd->add_option("--lambda2", cfg.lambda2, "segmentation loss weight");
  cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  cmd->add_option("--beta1", cfg.beta1, "Adam beta1");
  cmd->add_option("--beta2", cfg.beta2, "Adam beta2");
  cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
  cmd->add_option("--batch-size", cfg.batch_size, "training batch size");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--lr-halving-period", cfg.lr_halving_period, "epochs between halvings");
  cmd->add_option("--seed", cfg.seed, "run seed");
  cmd->add_option("--image-size", cfg.image_size, "input image side");
  cmd->add_option("--mask-threshold", cfg.mask_threshold, "mask binarization threshold");
  cmd->add_option("--val-fraction", cfg.val_fraction, "held-out tail fraction");
  cmd->add_flag("--rgb-baseline", cfg.rgb_baseline, "RGB-only variant without MPSM");
  cmd->add_flag("--cache-frequency-cue", cfg.cache_frequency_cue,
                "precompute frequency cues once");
  cmd->add_flag("--seg-raw-sum", cfg.seg_raw_sum,
                "segmentation loss as a raw pixel sum (no mean)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face-forgery detection via local patch relations"};
  app.require_subcommand(1);
  // INI/TOML file with per-subcommand sections, e.g. [train]; command-line
  // flags override file values. Must precede the subcommand name.
  app.set_config("--config", "", "configuration file (sections per subcommand)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic forgery corpus");
  std::string gen_out;
  int gen_count = 2000, gen_size = 64;
  uint64_t gen_seed = 42;
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_option("--count", gen_count, "number of samples");
  gen->add_option("--size", gen_size, "image side length");
  gen->add_option("--seed", gen_seed, "corpus seed");

  // train
  auto* train = app.add_subcommand("train", "train on a generated corpus");
  std::string train_data, train_out;
  locrel::TrainConfig cfg;
  train->add_option("--data", train_data, "corpus directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  add_train_options(train, cfg);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over a corpus");
  std::string eval_ckpt, eval_data, eval_out;
  int eval_batch = 16;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "corpus directory")->required();
  eval->add_option("--batch-size", eval_batch, "evaluation batch size");
  eval->add_option("--out", eval_out, "also append the JSON report to this file");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "per-image dump of prediction artifacts");
  std::string an_ckpt, an_image, an_source, an_out;
  analyze->add_option("--checkpoint", an_ckpt, "checkpoint file")->required();
  analyze->add_option("--image", an_image, "input image (PNG/PPM)")->required();
  analyze->add_option("--source", an_source, "pristine source image for the target pattern");
  analyze->add_option("--out", an_out, "output directory")->required();

  // export-heatmap
  auto* heat = app.add_subcommand("export-heatmap", "render a pattern CSV as a grayscale image");
  std::string heat_csv, heat_out;
  heat->add_option("--pattern", heat_csv, "pattern CSV file")->required();
  heat->add_option("--out", heat_out, "output image (PNG/PGM)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      locrel::datagen::generate_corpus(gen_out, gen_count, gen_size, gen_seed);
      std::cout << "wrote " << gen_count << " samples to " << gen_out << "\n";
    } else if (train->parsed()) {
      const auto result = locrel::trainer::train(cfg, train_data, train_out);
      std::cout << "best val AUC " << result.best_auc << " at epoch " << result.best_epoch
                << "\ncheckpoint: " << result.checkpoint_path
                << "\nmetrics:    " << result.metrics_path << "\n";
    } else if (eval->parsed()) {
      const auto report = locrel::trainer::evaluate(eval_ckpt, eval_data, eval_batch);
      const std::string line = locrel::trainer::eval_report_json(report);
      std::cout << line << "\n";
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::app);
        if (!out) throw locrel::IoError("cannot open " + eval_out);
        out << line << "\n";
      }
    } else if (analyze->parsed()) {
      std::optional<std::string> source;
      if (!an_source.empty()) source = an_source;
      const auto res = locrel::trainer::analyze(an_ckpt, an_image, source, an_out);
      std::cout << "y_hat " << res.y_hat << "\nmask  " << res.mask_path << "\n";
      if (!res.pattern_csv.empty()) {
        std::cout << "s_hat " << res.pattern_csv << " / " << res.pattern_image << "\n";
      }
      if (!res.target_csv.empty()) std::cout << "s     " << res.target_csv << "\n";
    } else if (heat->parsed()) {
      locrel::trainer::export_heatmap_file(heat_csv, heat_out);
      std::cout << "wrote " << heat_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
