#include "locrel/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "locrel/error.hpp"
#include "locrel/image_io.hpp"
#include "locrel/rng.hpp"
#include "locrel/supervision.hpp"

namespace locrel::datagen {

namespace {

// Band-limited noise: values on a coarse grid, bilinearly upsampled.
std::vector<double> smooth_noise(Rng& rng, int size, int step) {
  const int cg = size / step + 2;
  std::vector<double> coarse(static_cast<size_t>(cg) * cg);
  for (double& v : coarse) v = rng.normal();
  std::vector<double> out(static_cast<size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    const double fy = static_cast<double>(y) / step;
    const int y0 = static_cast<int>(fy);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) / step;
      const int x0 = static_cast<int>(fx);
      const double wx = fx - x0;
      const double v00 = coarse[static_cast<size_t>(y0) * cg + x0];
      const double v01 = coarse[static_cast<size_t>(y0) * cg + x0 + 1];
      const double v10 = coarse[static_cast<size_t>(y0 + 1) * cg + x0];
      const double v11 = coarse[static_cast<size_t>(y0 + 1) * cg + x0 + 1];
      out[static_cast<size_t>(y) * size + x] =
          (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
    }
  }
  return out;
}

// Blends an ellipse of the given tone over the image with a feathered rim.
void paint_ellipse(Image& img, double cx, double cy, double ax, double ay, const double tone[3],
                   double blend, double feather) {
  const double rim = std::min(ax, ay);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = (x - cx) / ax;
      const double dy = (y - cy) / ay;
      const double r = std::sqrt(dx * dx + dy * dy);
      if (r >= 1.0) continue;
      const double d = (1.0 - r) * rim;  // ~pixels to the boundary
      const double a = blend * std::min(1.0, d / feather);
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = (1.0 - a) * img.at(c, y, x) + a * tone[c];
      }
    }
  }
}

void clamp01(Image& img) {
  for (double& v : img.data) v = std::min(1.0, std::max(0.0, v));
}

// 2x block mean, replicated back to full resolution (down-then-up resampling).
Image block2_resample(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; y += 2) {
      for (int x = 0; x < img.width; x += 2) {
        const int y1 = std::min(y + 1, img.height - 1);
        const int x1 = std::min(x + 1, img.width - 1);
        const double m = 0.25 * (img.at(c, y, x) + img.at(c, y, x1) + img.at(c, y1, x) +
                                 img.at(c, y1, x1));
        out.at(c, y, x) = m;
        out.at(c, y, x1) = m;
        out.at(c, y1, x) = m;
        out.at(c, y1, x1) = m;
      }
    }
  }
  return out;
}

}  // namespace

SyntheticSample generate_real(uint64_t seed, int size) {
  if (size < 32) throw ConfigError("generate_real: size must be >= 32");
  Rng rng(Rng::derive(seed, 1));

  Image img(size, size, 3);
  const double base[3] = {rng.uniform(0.3, 0.65), rng.uniform(0.3, 0.6), rng.uniform(0.25, 0.55)};
  for (int c = 0; c < 3; ++c) {
    double* ch = img.channel(c);
    std::fill(ch, ch + img.pixels(), base[c]);
  }

  // two smooth directional gradients
  for (int g = 0; g < 2; ++g) {
    const double fx = rng.uniform(-1.2, 1.2);
    const double fy = rng.uniform(-1.2, 1.2);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double amp[3] = {rng.uniform(0.04, 0.12), rng.uniform(0.04, 0.12),
                           rng.uniform(0.04, 0.12)};
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double v = std::cos(2.0 * M_PI * (fx * x + fy * y) / size + phase);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) += amp[c] * v;
      }
    }
  }

  // band-limited texture, one shared field and a faint per-channel field
  const std::vector<double> shared = smooth_noise(rng, size, 8);
  for (int c = 0; c < 3; ++c) {
    const std::vector<double> own = smooth_noise(rng, size, 4);
    double* ch = img.channel(c);
    for (size_t i = 0; i < img.pixels(); ++i) ch[i] += 0.06 * shared[i] + 0.025 * own[i];
  }

  // face-like layout: skin ellipse, two eyes, mouth
  const double cx = size * rng.uniform(0.44, 0.56);
  const double cy = size * rng.uniform(0.46, 0.56);
  const double fax = size * rng.uniform(0.26, 0.34);
  const double fay = size * rng.uniform(0.32, 0.40);
  const double skin[3] = {rng.uniform(0.64, 0.80), rng.uniform(0.50, 0.64), rng.uniform(0.40, 0.55)};
  paint_ellipse(img, cx, cy, fax, fay, skin, 0.65, 2.5);

  const double eye_dx = fax * rng.uniform(0.42, 0.55);
  const double eye_dy = fay * rng.uniform(0.25, 0.38);
  const double eye_r = size * rng.uniform(0.035, 0.055);
  const double dark[3] = {0.12, 0.10, 0.09};
  paint_ellipse(img, cx - eye_dx, cy - eye_dy, eye_r, eye_r * 0.8, dark, 0.8, 1.5);
  paint_ellipse(img, cx + eye_dx, cy - eye_dy, eye_r, eye_r * 0.8, dark, 0.8, 1.5);

  const double mouth[3] = {0.52, 0.22, 0.22};
  paint_ellipse(img, cx, cy + fay * rng.uniform(0.42, 0.55), size * rng.uniform(0.09, 0.13),
                size * rng.uniform(0.035, 0.055), mouth, 0.7, 1.5);

  clamp01(img);

  SyntheticSample s;
  s.image = std::move(img);
  s.mask = Image(size, size, 1);
  s.label = 0;
  s.seed = seed;
  return s;
}

std::pair<SyntheticSample, SyntheticSample> generate_forged(uint64_t seed, int size) {
  SyntheticSample source = generate_real(Rng::derive(seed, 11), size);
  source.seed = seed;

  for (int attempt = 0; attempt < 16; ++attempt) {
    Rng rng(Rng::derive(seed, 101 + attempt));
    SyntheticSample donor = generate_real(Rng::derive(seed, 211 + attempt), size);

    // Elongated elliptical paste region (like a manipulated mouth or brow
    // line). The thin minor axis keeps any single patch block only
    // partially forged, so the pairwise similarity targets stay inside the
    // band a cosine pattern over nonnegative features can reach.
    const double frac = rng.uniform(0.065, 0.115);
    const double minor = rng.uniform(2.8, 3.6);
    const double major =
        std::min(frac * size * size / (M_PI * minor), size / 2.0 - 2.5);
    const bool horizontal = rng.uniform() < 0.5;
    const double ax = horizontal ? major : minor;
    const double ay = horizontal ? minor : major;
    // center drawn so the ellipse fits with a small margin
    const double cx = rng.uniform(ax + 2.0, size - 2.0 - ax);
    const double cy = rng.uniform(ay + 2.0, size - 2.0 - ay);

    // donor texture re-toned away from the source so the difference clears
    // the mask threshold across most of the region
    double region_mean[3] = {0, 0, 0};
    long count = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay;
        if (dx * dx + dy * dy >= 1.0) continue;
        for (int c = 0; c < 3; ++c) region_mean[c] += source.image.at(c, y, x);
        ++count;
      }
    }
    if (count == 0) continue;
    // fine-grained detail so the 2x resampling step leaves strong block
    // edges (the frequency artifact the cue stream keys on)
    const std::vector<double> fine = smooth_noise(rng, size, 2);
    Image donor_tex(size, size, 3);
    for (int c = 0; c < 3; ++c) {
      region_mean[c] /= static_cast<double>(count);
      const double dir = region_mean[c] > 0.5 ? -1.0 : 1.0;
      const double base = region_mean[c] + dir * rng.uniform(0.28, 0.40);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          donor_tex.at(c, y, x) = base + 0.35 * (donor.image.at(c, y, x) - 0.5) +
                                  0.16 * fine[static_cast<size_t>(y) * size + x];
    }
    clamp01(donor_tex);

    // frequency artifact: 2x down then 2x up resampling of the donor content
    Image artifact = block2_resample(donor_tex);

    Image forged = source.image;
    const double rim = std::min(ax, ay);
    const double feather = std::min(2.0, rim / 3.0);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = (x - cx) / ax, dy = (y - cy) / ay;
        const double r = std::sqrt(dx * dx + dy * dy);
        if (r >= 1.0) continue;
        const double a = std::min(1.0, (1.0 - r) * rim / feather);
        for (int c = 0; c < 3; ++c) {
          forged.at(c, y, x) = (1.0 - a) * forged.at(c, y, x) + a * artifact.at(c, y, x);
        }
      }
    }
    clamp01(forged);

    Image mask = supervision::build_mask(source.image, forged, supervision::kMaskThreshold);
    double mask_frac = 0.0;
    for (double v : mask.data) mask_frac += v;
    mask_frac /= static_cast<double>(mask.data.size());
    if (mask_frac < 0.045 || mask_frac > 0.38) continue;

    SyntheticSample out;
    out.image = std::move(forged);
    out.mask = std::move(mask);
    out.label = 1;
    out.seed = seed;
    return {std::move(source), std::move(out)};
  }
  throw NumericError("generate_forged: no attempt produced a mask fraction in [0.04, 0.40]");
}

void generate_corpus(const std::string& dir, int count, int size, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");

  std::ofstream manifest(fs::path(dir) / "manifest.csv");
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  manifest << "path,label,seed\n";

  char name[64];
  for (int i = 0; i < count; ++i) {
    const uint64_t sample_seed = Rng::derive(seed, static_cast<uint64_t>(i));
    const int label = i % 2 == 0 ? 0 : 1;
    SyntheticSample sample;
    if (label == 0) {
      sample = generate_real(sample_seed, size);
    } else {
      sample = generate_forged(sample_seed, size).second;
    }
    std::snprintf(name, sizeof(name), "sample_%05d", i);
    const std::string img_rel = std::string("images/") + name + ".png";
    const std::string mask_rel = std::string("masks/") + name + ".pgm";
    save_image(sample.image, (fs::path(dir) / img_rel).string());
    save_mask_pgm(sample.mask, (fs::path(dir) / mask_rel).string());
    manifest << img_rel << "," << label << "," << sample_seed << "\n";
  }
  if (!manifest) throw IoError("short manifest write in " + dir);
}

std::vector<ManifestEntry> load_manifest(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "manifest.csv");
  if (!in) throw IoError("cannot open manifest.csv in " + dir);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string label_s, seed_s;
    if (!std::getline(ss, e.image_path, ',') || !std::getline(ss, label_s, ',') ||
        !std::getline(ss, seed_s)) {
      throw IoError("malformed manifest line: " + line);
    }
    e.label = std::stoi(label_s);
    e.seed = std::stoull(seed_s);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string mask_path(const std::string& dir, const ManifestEntry& entry) {
  namespace fs = std::filesystem;
  const fs::path img(entry.image_path);
  return (fs::path(dir) / "masks" / img.stem()).string() + ".pgm";
}

}  // namespace locrel::datagen
