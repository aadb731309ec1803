#pragma once

#include <vector>

#include "locrel/image.hpp"

namespace locrel::supervision {

/// Default binarization threshold for the manipulation mask.
inline constexpr double kMaskThreshold = 0.15;

/// Absolute per-channel difference, luminance-reduced, thresholded to {0,1}.
/// Images are already scaled to [0,1] on load, which absorbs the /255 step.
Image build_mask(const Image& source, const Image& forged, double threshold = kMaskThreshold);

/// Mean forged fraction per Ceil-grid block (same k x k grid as the feature
/// partition). Padding never exists here: means run over real pixels only.
/// Row-major grid order matching the patch ordering.
std::vector<double> patch_probabilities(const Image& mask, int k);

/// Second-order target: s[i][j] = 1 - (p_i - p_j)^2, k^2 x k^2 row-major.
std::vector<double> target_similarity(const std::vector<double>& p);

}  // namespace locrel::supervision
