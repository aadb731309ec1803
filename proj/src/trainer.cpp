#include "locrel/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "locrel/checkpoint.hpp"
#include "locrel/datagen.hpp"
#include "locrel/dct.hpp"
#include "locrel/image_io.hpp"
#include "locrel/mpsm.hpp"
#include "locrel/net.hpp"
#include "locrel/optim.hpp"
#include "locrel/rng.hpp"
#include "locrel/supervision.hpp"

namespace locrel::trainer {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Corpus {
  std::vector<Image> images;
  std::vector<Image> masks;
  std::vector<int> labels;
};

Corpus load_corpus(const std::string& dir, int expect_size) {
  const auto manifest = datagen::load_manifest(dir);
  if (manifest.empty()) throw IoError("empty corpus manifest in " + dir);
  Corpus corpus;
  long corrupt = 0;
  for (const auto& entry : manifest) {
    try {
      Image img = load_image((fs::path(dir) / entry.image_path).string());
      if (img.channels != 3 || img.height != expect_size || img.width != expect_size) {
        throw IoError("unexpected geometry in " + entry.image_path);
      }
      Image mask = load_mask_pgm(datagen::mask_path(dir, entry));
      if (mask.height != expect_size || mask.width != expect_size) {
        throw IoError("mask geometry mismatch for " + entry.image_path);
      }
      corpus.images.push_back(std::move(img));
      corpus.masks.push_back(std::move(mask));
      corpus.labels.push_back(entry.label);
    } catch (const std::exception& e) {
      ++corrupt;
      std::cerr << "warning: skipping corrupt sample " << entry.image_path << ": " << e.what()
                << "\n";
    }
  }
  if (corrupt * 20 > static_cast<long>(manifest.size())) {
    throw IoError("more than 5% of corpus samples are corrupt (" + std::to_string(corrupt) +
                  " of " + std::to_string(manifest.size()) + ")");
  }
  return corpus;
}

// planar [0,1] image -> NHWC slot of a batch tensor
void fill_rgb(diff::Tensor& x, int slot, const Image& img) {
  const int s = img.height;
  double* dst = x.data() + static_cast<size_t>(slot) * s * s * 3;
  for (int y = 0; y < s; ++y) {
    for (int xx = 0; xx < s; ++xx) {
      for (int c = 0; c < 3; ++c) {
        dst[(static_cast<size_t>(y) * s + xx) * 3 + c] = img.at(c, y, xx);
      }
    }
  }
}

void fill_gray(diff::Tensor& x, int slot, const Image& img) {
  const int s = img.height;
  double* dst = x.data() + static_cast<size_t>(slot) * s * s;
  const double* src = img.channel(0);
  std::copy(src, src + static_cast<size_t>(s) * s, dst);
}

struct BatchInputs {
  diff::Tensor x1;        // [B,S,S,3]
  diff::Tensor x2;        // [B,S,S,1]; undefined in the baseline variant
  diff::Tensor y;         // [B,1]
  diff::Tensor mask;      // [B,S,S,1]
  diff::Tensor s_target;  // [B,k^2,k^2]; undefined in the baseline variant
};

class BatchBuilder {
 public:
  BatchBuilder(const Corpus& corpus, const TrainConfig& cfg)
      : corpus_(corpus), cfg_(cfg) {
    if (cfg_.cache_frequency_cue && !cfg_.rgb_baseline) {
      cache_.reserve(corpus_.images.size());
      for (const Image& img : corpus_.images) {
        cache_.push_back(frequency_cue(img, {cfg_.alpha}));
      }
    }
  }

  BatchInputs build(const std::vector<int>& indices) const {
    const int b = static_cast<int>(indices.size());
    const int s = cfg_.image_size;
    const int k2 = cfg_.k * cfg_.k;
    BatchInputs in;
    in.x1 = diff::Tensor::zeros({b, s, s, 3});
    in.y = diff::Tensor::zeros({b, 1});
    in.mask = diff::Tensor::zeros({b, s, s, 1});
    if (!cfg_.rgb_baseline) {
      in.x2 = diff::Tensor::zeros({b, s, s, 1});
      in.s_target = diff::Tensor::zeros({b, k2, k2});
    }
    for (int i = 0; i < b; ++i) {
      const int idx = indices[i];
      fill_rgb(in.x1, i, corpus_.images[idx]);
      in.y.data()[i] = corpus_.labels[idx];
      fill_gray(in.mask, i, corpus_.masks[idx]);
      if (!cfg_.rgb_baseline) {
        if (cfg_.cache_frequency_cue) {
          fill_gray(in.x2, i, cache_[idx]);
        } else {
          fill_gray(in.x2, i, frequency_cue(corpus_.images[idx], {cfg_.alpha}));
        }
        const auto p = supervision::patch_probabilities(corpus_.masks[idx], cfg_.k);
        const auto st = supervision::target_similarity(p);
        std::copy(st.begin(), st.end(),
                  in.s_target.data() + static_cast<size_t>(i) * k2 * k2);
      }
    }
    return in;
  }

 private:
  const Corpus& corpus_;
  const TrainConfig& cfg_;
  std::vector<Image> cache_;
};

std::vector<std::pair<double, int>> score_split(net::TwoStreamNet& network,
                                                const BatchBuilder& builder,
                                                const std::vector<int>& indices,
                                                const Corpus& corpus, int batch_size) {
  std::vector<std::pair<double, int>> scores;
  scores.reserve(indices.size());
  for (size_t start = 0; start < indices.size(); start += batch_size) {
    const size_t stop = std::min(indices.size(), start + batch_size);
    std::vector<int> batch(indices.begin() + start, indices.begin() + stop);
    BatchInputs in = builder.build(batch);
    diff::Tape tape(false);
    auto out = network.forward(tape, in.x1, in.x2, /*training=*/false);
    for (size_t i = 0; i < batch.size(); ++i) {
      scores.emplace_back(out.y_hat.data()[i], corpus.labels[batch[i]]);
    }
  }
  return scores;
}

// Patch pairs where either side is pure partition padding (a grid row or
// column that falls entirely outside the high-stage map) carry no signal;
// their pattern entries are structurally frozen. The similarity loss skips
// them. Whenever k divides the map extent this is the all-ones weight.
diff::Tensor sim_validity_weights(int batch, int image_size, int k) {
  const int hs = image_size / 8;  // high-stage extent
  const int ph = (hs + k - 1) / k;
  std::vector<char> valid(static_cast<size_t>(k) * k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c)
      valid[static_cast<size_t>(r) * k + c] = (r * ph < hs && c * ph < hs) ? 1 : 0;
  const int k2 = k * k;
  diff::Tensor w = diff::Tensor::zeros({batch, k2, k2});
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < k2; ++i)
      for (int j = 0; j < k2; ++j)
        w.data()[(static_cast<size_t>(b) * k2 + i) * k2 + j] =
            (valid[i] && valid[j]) ? 1.0 : 0.0;
  return w;
}

ojson epoch_json(const EpochLog& log, const TrainConfig& cfg) {
  ojson j;
  j["epoch"] = log.epoch;
  j["variant"] = cfg.rgb_baseline ? "rgb_baseline" : "full";
  j["lr"] = log.lr;
  j["train_loss"] = log.train_loss;
  j["l_ce"] = log.l_ce;
  j["l_sim"] = log.l_sim;
  j["l_seg"] = log.l_seg;
  j["val_acc"] = log.val_acc;
  j["val_auc"] = log.val_auc;
  j["val_eer"] = log.val_eer;
  j["best"] = log.is_best;
  return j;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);

  const Corpus corpus = load_corpus(data_dir, cfg.image_size);
  const int total = static_cast<int>(corpus.images.size());
  const int n_val = std::max(2, static_cast<int>(std::floor(total * cfg.val_fraction)));
  if (n_val >= total) throw ConfigError("corpus too small for the validation split");

  std::vector<int> train_idx, val_idx;
  for (int i = 0; i < total - n_val; ++i) train_idx.push_back(i);
  for (int i = total - n_val; i < total; ++i) val_idx.push_back(i);

  net::NetConfig ncfg;
  ncfg.image_size = cfg.image_size;
  ncfg.k = cfg.k;
  ncfg.rgb_baseline = cfg.rgb_baseline;
  ncfg.seed = cfg.seed;
  net::TwoStreamNet network(ncfg);

  optim::AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.beta1 = cfg.beta1;
  acfg.beta2 = cfg.beta2;
  acfg.weight_decay = cfg.weight_decay;
  optim::Adam adam(network.store().params(), acfg);

  const BatchBuilder builder(corpus, cfg);

  TrainResult result;
  result.metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  result.checkpoint_path = (fs::path(out_dir) / "checkpoint_best.bin").string();
  std::ofstream metrics(result.metrics_path);
  if (!metrics) throw IoError("cannot write " + result.metrics_path);

  checkpoint::Meta meta;
  meta.net = ncfg;
  meta.alpha = cfg.alpha;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.set_lr(optim::lr_at_epoch(cfg.lr, epoch, cfg.lr_halving_period));

    std::vector<int> order = train_idx;
    Rng shuffle_rng(Rng::derive(cfg.seed, 0xE90C + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, ce_sum = 0.0, sim_sum = 0.0, seg_sum = 0.0;
    long seen = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      BatchInputs in = builder.build(batch);

      diff::Tape tape;
      auto out = network.forward(tape, in.x1, in.x2, /*training=*/true);
      diff::Tensor ce = objective::loss_ce(tape, out.y_hat, in.y);
      diff::Tensor sim =
          cfg.rgb_baseline
              ? diff::Tensor::from_data({1}, {0.0})
              : objective::loss_sim(tape, out.s_hat, in.s_target,
                                    sim_validity_weights(static_cast<int>(batch.size()),
                                                         cfg.image_size, cfg.k));
      diff::Tensor seg = objective::loss_seg(tape, out.mask_hat, in.mask, !cfg.seg_raw_sum);
      objective::LossBreakdown breakdown =
          objective::loss_total(tape, ce, sim, seg, cfg.lambda1, cfg.lambda2);
      if (!std::isfinite(breakdown.l_total)) {
        throw NumericError("training loss is not finite at epoch " + std::to_string(epoch));
      }

      adam.zero_grad();
      tape.backward(breakdown.total);
      adam.step();

      const double bn = static_cast<double>(batch.size());
      loss_sum += breakdown.l_total * bn;
      ce_sum += breakdown.l_ce * bn;
      sim_sum += breakdown.l_sim * bn;
      seg_sum += breakdown.l_seg * bn;
      seen += batch.size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = adam.lr();
    log.train_loss = loss_sum / seen;
    log.l_ce = ce_sum / seen;
    log.l_sim = sim_sum / seen;
    log.l_seg = seg_sum / seen;

    // scoring batches can be larger than training batches: eval-mode outputs
    // are batch-composition independent
    const auto scores =
        score_split(network, builder, val_idx, corpus, std::max(cfg.batch_size, 32));
    const objective::EvalReport report = objective::metrics(scores);
    log.val_acc = report.acc;
    log.val_auc = report.auc;
    log.val_eer = report.eer;

    // selection by AUC; among equal-AUC epochs prefer the better accuracy
    const double best_acc =
        result.best_epoch < 0 ? -1.0 : result.log[static_cast<size_t>(result.best_epoch)].val_acc;
    if (result.best_epoch < 0 || log.val_auc > result.best_auc ||
        (log.val_auc == result.best_auc && log.val_acc > best_acc)) {
      result.best_auc = log.val_auc;
      result.best_epoch = epoch;
      log.is_best = true;
      checkpoint::save(result.checkpoint_path, meta, network.store());
    }
    result.log.push_back(log);
    metrics << epoch_json(log, cfg).dump() << "\n";
    metrics.flush();
  }
  return result;
}

namespace {

struct LoadedNet {
  checkpoint::Meta meta;
  std::unique_ptr<net::TwoStreamNet> network;
};

LoadedNet load_network(const std::string& checkpoint_path) {
  LoadedNet ln;
  ln.meta = checkpoint::peek(checkpoint_path);
  ln.network = std::make_unique<net::TwoStreamNet>(ln.meta.net);
  checkpoint::load_into(checkpoint_path, *ln.network);
  return ln;
}

}  // namespace

objective::EvalReport evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                               int batch_size) {
  LoadedNet ln = load_network(checkpoint_path);
  TrainConfig cfg;
  cfg.image_size = ln.meta.net.image_size;
  cfg.k = ln.meta.net.k;
  cfg.alpha = ln.meta.alpha;
  cfg.rgb_baseline = ln.meta.net.rgb_baseline;
  const Corpus corpus = load_corpus(data_dir, cfg.image_size);
  const BatchBuilder builder(corpus, cfg);
  std::vector<int> all(corpus.images.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const auto scores = score_split(*ln.network, builder, all, corpus, batch_size);
  return objective::metrics(scores);
}

AnalyzeResult analyze(const std::string& checkpoint_path, const std::string& image_path,
                      const std::optional<std::string>& source_path, const std::string& out_dir) {
  LoadedNet ln = load_network(checkpoint_path);
  const int s = ln.meta.net.image_size;
  fs::create_directories(out_dir);

  Image img = load_image(image_path);
  if (img.channels != 3 || img.height != s || img.width != s) {
    throw DimensionError("analyze: image must be 3-channel " + std::to_string(s) + "x" +
                         std::to_string(s));
  }

  diff::Tensor x1 = diff::Tensor::zeros({1, s, s, 3});
  fill_rgb(x1, 0, img);
  diff::Tensor x2;
  if (!ln.meta.net.rgb_baseline) {
    x2 = diff::Tensor::zeros({1, s, s, 1});
    fill_gray(x2, 0, frequency_cue(img, {ln.meta.alpha}));
  }
  diff::Tape tape(false);
  auto out = ln.network->forward(tape, x1, x2, /*training=*/false);

  AnalyzeResult res;
  res.y_hat = out.y_hat.data()[0];

  Image mask_img(s, s, 1);
  std::copy(out.mask_hat.data(), out.mask_hat.data() + static_cast<size_t>(s) * s,
            mask_img.data.begin());
  res.mask_path = (fs::path(out_dir) / "mask_hat.pgm").string();
  save_image(mask_img, res.mask_path);

  if (out.s_hat.defined()) {
    const int k2 = ln.meta.net.k * ln.meta.net.k;
    std::vector<double> pattern(out.s_hat.data(),
                                out.s_hat.data() + static_cast<size_t>(k2) * k2);
    res.pattern_csv = (fs::path(out_dir) / "s_hat.csv").string();
    res.pattern_image = (fs::path(out_dir) / "s_hat.png").string();
    mpsm::export_pattern_csv(pattern, k2, res.pattern_csv);
    mpsm::export_pattern_heatmap(pattern, k2, res.pattern_image);
  }

  if (source_path.has_value()) {
    Image source = load_image(*source_path);
    Image mask = supervision::build_mask(source, img, supervision::kMaskThreshold);
    const auto p = supervision::patch_probabilities(mask, ln.meta.net.k);
    const auto st = supervision::target_similarity(p);
    res.target_csv = (fs::path(out_dir) / "s_target.csv").string();
    mpsm::export_pattern_csv(st, ln.meta.net.k * ln.meta.net.k, res.target_csv);
  }
  return res;
}

void export_heatmap_file(const std::string& csv_path, const std::string& out_image) {
  int k2 = 0;
  const std::vector<double> pattern = mpsm::load_pattern_csv(csv_path, k2);
  mpsm::export_pattern_heatmap(pattern, k2, out_image);
}

std::string eval_report_json(const objective::EvalReport& report) {
  ojson j;
  j["acc"] = report.acc;
  j["auc"] = report.auc;
  j["eer"] = report.eer;
  j["threshold"] = report.threshold;
  return j.dump();
}

}  // namespace locrel::trainer
