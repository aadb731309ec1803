#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "locrel/image.hpp"

namespace locrel::datagen {

struct SyntheticSample {
  Image image;    // 3-channel, values in [0,1]
  Image mask;     // 1-channel, {0,1}; all zero for real samples
  int label = 0;  // 0 real, 1 forged
  uint64_t seed = 0;
};

/// Procedural face-like texture: smooth gradients, band-limited noise and an
/// ellipse layout. Deterministic in (seed, size). size must be >= 32.
SyntheticSample generate_real(uint64_t seed, int size);

/// Takes a real sample, pastes an elliptical donor region processed by a
/// 2x-down / 2x-up resampling step (the frequency artifact) with feathered
/// blending, and derives the ground-truth mask by thresholded differencing.
/// Returns (source, forged); the forged mask covers 4-40% of the pixels.
std::pair<SyntheticSample, SyntheticSample> generate_forged(uint64_t seed, int size);

struct ManifestEntry {
  std::string image_path;  // relative to the corpus directory
  int label = 0;
  uint64_t seed = 0;
};

/// Writes images/ (PNG), masks/ (PGM) and manifest.csv with columns
/// path,label,seed. A corpus of N holds ceil(N/2) real and floor(N/2) forged
/// samples, alternating real-first. Regeneration is bit-exact.
void generate_corpus(const std::string& dir, int count, int size, uint64_t seed);

std::vector<ManifestEntry> load_manifest(const std::string& dir);

/// masks/<image stem>.pgm next to the image path.
std::string mask_path(const std::string& dir, const ManifestEntry& entry);

}  // namespace locrel::datagen
