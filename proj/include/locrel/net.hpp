#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "locrel/ops.hpp"
#include "locrel/tensor.hpp"

namespace locrel::net {

/// Ordered registry of trainable tensors and running-statistics buffers.
/// Registration order is fixed by construction, so optimizer sweeps and
/// checkpoints are deterministic.
class ParamStore {
 public:
  diff::Tensor create_param(const std::string& name, std::vector<int> shape);
  void register_buffer(const std::string& name, std::vector<double>* buf);

  const std::vector<std::pair<std::string, diff::Tensor>>& params() const { return params_; }
  const std::vector<std::pair<std::string, std::vector<double>*>>& buffers() const {
    return buffers_;
  }

 private:
  std::vector<std::pair<std::string, diff::Tensor>> params_;
  std::vector<std::pair<std::string, std::vector<double>*>> buffers_;
};

struct NetConfig {
  int image_size = 64;
  int k = 5;
  std::array<int, 3> widths{16, 32, 64};
  bool rgb_baseline = false;  // ablation variant: RGB stream only, pooled head
  uint64_t seed = 42;

  void validate() const;  // ConfigError on inconsistent geometry
};

struct RfamOutput {
  diff::Tensor a1;     // [N,H,W,1], attention on the frequency stream map
  diff::Tensor a2;     // [N,H,W,1], attention on the RGB stream map
  diff::Tensor fused;  // a1 (.) u1 + a2 (.) u2
};

/// Two-stream backbone (RGB + frequency) with per-stage attention fusion,
/// a patch-similarity classification head and a mask decoder. The
/// rgb_baseline variant keeps only the RGB stream and classifies from a
/// pooled feature vector; its decoder consumes the raw stage features.
class TwoStreamNet {
 public:
  explicit TwoStreamNet(const NetConfig& cfg);
  TwoStreamNet(const TwoStreamNet&) = delete;
  TwoStreamNet& operator=(const TwoStreamNet&) = delete;

  struct Output {
    diff::Tensor y_hat;                 // [N,1] forgery probability
    diff::Tensor mask_hat;              // [N,S,S,1] in (0,1)
    diff::Tensor s_hat;                 // [N,k^2,k^2]; undefined in the baseline
    std::array<diff::Tensor, 3> fused;  // low/mid/high maps feeding MPSM + decoder
  };

  /// x1: [N,S,S,3] RGB input; x2: [N,S,S,1] frequency cue (ignored by the
  /// baseline variant, which accepts an undefined tensor). `training`
  /// selects batch statistics in every BatchNorm.
  Output forward(diff::Tape& tape, const diff::Tensor& x1, const diff::Tensor& x2, bool training);

  /// Attention fusion of one stage pair; exposed for tests.
  RfamOutput rfam(diff::Tape& tape, int stage, const diff::Tensor& u1, const diff::Tensor& u2,
                  bool training);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const NetConfig& config() const { return cfg_; }

 private:
  struct Conv {
    diff::Tensor w, b;
  };
  struct Bn {
    diff::Tensor gamma, beta;
    diff::BnStats stats;
  };
  struct StageBlock {
    Conv c1;
    Bn b1;
    Conv c2;
    Bn b2;
  };
  struct Rfam {
    Conv fuse;  // 1x1, 2C -> 2C
    Bn bn;
    Conv attn;  // 3x3, 2C -> 2
  };
  struct DecBlock {
    Conv conv;
    Bn bn;
  };

  diff::Tensor stage_forward(diff::Tape& tape, StageBlock& s, const diff::Tensor& x,
                             bool training);
  diff::Tensor decode(diff::Tape& tape, const std::array<diff::Tensor, 3>& feats, bool training);

  NetConfig cfg_;
  ParamStore store_;

  std::array<StageBlock, 3> rgb_stages_;
  std::array<StageBlock, 3> freq_stages_;  // unused by the baseline variant
  std::array<Rfam, 3> rfams_;              // unused by the baseline variant
  std::array<DecBlock, 3> dec_;
  Conv dec_final_;
  diff::Tensor head_w1, head_b1, head_w2, head_b2;
};

}  // namespace locrel::net
