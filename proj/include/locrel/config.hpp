#pragma once

#include <cstdint>

#include "locrel/error.hpp"

namespace locrel {

/// Training hyperparameters. Defaults are the shipped configuration.
struct TrainConfig {
  double alpha = 0.33;        // frequency cue high-pass fraction
  int k = 5;                  // patch grid side
  double lambda1 = 10.0;      // similarity loss weight
  double lambda2 = 1.0;       // segmentation loss weight
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  int batch_size = 16;
  int epochs = 20;
  int lr_halving_period = 10;  // epochs, counted from 0
  uint64_t seed = 42;
  int image_size = 64;
  double mask_threshold = 0.15;
  bool rgb_baseline = false;        // ablation: RGB-only, no MPSM
  bool cache_frequency_cue = false; // precompute x2 once per corpus
  bool seg_raw_sum = false;         // raw per-pixel sum instead of the mean
  double val_fraction = 0.2;        // held-out tail of the manifest

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (k < 1) throw ConfigError("k must be positive");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss weights must be nonnegative");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("betas must lie in (0, 1)");
    }
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (lr_halving_period < 1) throw ConfigError("lr_halving_period must be positive");
    if (image_size < 16 || image_size % 8 != 0) {
      throw ConfigError("image_size must be a multiple of 8, at least 16");
    }
    if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) {
      throw ConfigError("mask_threshold must lie in (0, 1)");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
      throw ConfigError("val_fraction must lie in (0, 1)");
    }
  }
};

}  // namespace locrel
