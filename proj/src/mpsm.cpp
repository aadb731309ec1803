#include "locrel/mpsm.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "locrel/error.hpp"
#include "locrel/image.hpp"
#include "locrel/image_io.hpp"

namespace locrel::mpsm {

diff::Tensor fuse_multiscale(diff::Tape& tape, const diff::Tensor& low, const diff::Tensor& mid,
                             const diff::Tensor& high) {
  for (const diff::Tensor* t : {&low, &mid, &high}) {
    if (t->ndim() != 4 || t->dim(1) < 1 || t->dim(2) < 1) {
      throw DimensionError("fuse_multiscale: stage maps must be non-empty [N,H,W,C]");
    }
  }
  const int ho = high.dim(1), wo = high.dim(2);
  diff::Tensor low_r = diff::resize_bilinear(tape, low, ho, wo);
  diff::Tensor mid_r = diff::resize_bilinear(tape, mid, ho, wo);
  return diff::concat_channels(tape, {low_r, mid_r, high});
}

diff::Tensor partition(diff::Tape& tape, const diff::Tensor& fused, int k) {
  return diff::extract_patches(tape, fused, k);
}

diff::Tensor similarity_pattern(diff::Tape& tape, const diff::Tensor& patches) {
  if (patches.ndim() != 3) throw DimensionError("similarity_pattern: expected [N,k^2,L]");
  diff::Tensor sq = diff::mul(tape, patches, patches);
  diff::Tensor sumsq = diff::reduce_sum_lastdim(tape, sq);
  diff::Tensor norm = diff::sqrt_op(tape, diff::affine(tape, sumsq, 1.0, kNormEps * kNormEps));
  diff::Tensor unit = diff::div_rows(tape, patches, norm);
  diff::Tensor cosine = diff::bmm_nt(tape, unit, unit);
  // rounding can push a near-identical pair a few ulp past 1; the pattern
  // contract is a hard [0,1]
  return diff::clamp(tape, diff::affine(tape, cosine, 0.5, 0.5), 0.0, 1.0);
}

void export_pattern_csv(const std::vector<double>& s, int k2, const std::string& path) {
  if (s.size() != static_cast<size_t>(k2) * k2) {
    throw DimensionError("export_pattern_csv: pattern size must be k^2 x k^2");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[64];
  for (int i = 0; i < k2; ++i) {
    for (int j = 0; j < k2; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", s[static_cast<size_t>(i) * k2 + j]);
      out << buf << (j + 1 == k2 ? "\n" : ",");
    }
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<double> load_pattern_csv(const std::string& path, int& k2_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> vals;
  std::string line;
  int rows = 0, cols = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      vals.push_back(std::stod(cell));
      ++c;
    }
    if (cols < 0) cols = c;
    if (c != cols) throw IoError("ragged CSV in " + path);
    ++rows;
  }
  if (rows == 0 || rows != cols) throw IoError("pattern CSV must be square: " + path);
  k2_out = rows;
  return vals;
}

void export_pattern_heatmap(const std::vector<double>& s, int k2, const std::string& path) {
  if (s.size() != static_cast<size_t>(k2) * k2) {
    throw DimensionError("export_pattern_heatmap: pattern size must be k^2 x k^2");
  }
  Image img(k2, k2, 1);
  img.data = s;
  save_image(img, path);
}

}  // namespace locrel::mpsm
