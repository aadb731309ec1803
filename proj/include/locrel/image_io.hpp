#pragma once

#include <string>

#include "locrel/image.hpp"

namespace locrel {

/// Reads an 8-bit PNG/PGM/PPM by extension (.png, .pgm, .ppm). Samples are
/// scaled by 1/255. Palette PNGs are expanded; alpha is stripped.
Image load_image(const std::string& path);

/// Writes an 8-bit PNG/PGM/PPM by extension. Values are clamped to [0, 1],
/// scaled by 255 and rounded to nearest.
void save_image(const Image& img, const std::string& path);

/// Binary PGM with values {0, 255}; 1.0 pixels map to 255.
void save_mask_pgm(const Image& mask, const std::string& path);

/// Loads a mask PGM back to {0, 1} values (threshold at 128).
Image load_mask_pgm(const std::string& path);

}  // namespace locrel
