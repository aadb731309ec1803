#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "locrel/datagen.hpp"
#include "locrel/dct.hpp"
#include "locrel/error.hpp"
#include "locrel/supervision.hpp"
#include "support/test_util.hpp"

using namespace locrel;
using namespace locrel::datagen;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate_real is deterministic and bounded") {
  SyntheticSample a = generate_real(1234, 64);
  SyntheticSample b = generate_real(1234, 64);
  CHECK(a.image.data == b.image.data);
  CHECK(a.label == 0);
  for (double v : a.mask.data) CHECK(v == 0.0);
  for (double v : a.image.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  SyntheticSample c = generate_real(1235, 64);
  CHECK(a.image.data != c.image.data);
}

TEST_CASE("generate_real produces a non-degenerate histogram") {
  for (uint64_t seed : {1ull, 7ull, 99ull, 12345ull}) {
    SyntheticSample s = generate_real(seed, 64);
    const double mean = mean_of(s.image.data);
    double var = 0.0;
    for (double v : s.image.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.image.data.size());
    CHECK(std::sqrt(var) > 0.02);
  }
}

TEST_CASE("generate_real rejects tiny sizes") {
  CHECK_THROWS_AS(generate_real(1, 16), ConfigError);
}

TEST_CASE("generate_forged: mask fraction, consistency and determinism") {
  for (uint64_t seed : {11ull, 42ull, 4242ull, 90210ull}) {
    auto [source, forged] = generate_forged(seed, 64);
    CHECK(forged.label == 1);
    CHECK(source.label == 0);

    const double frac = mean_of(forged.mask.data);
    CHECK(frac >= 0.04);
    CHECK(frac <= 0.40);

    // the stored mask is exactly the thresholded difference of the pair
    Image recomputed = supervision::build_mask(source.image, forged.image);
    CHECK(recomputed.data == forged.mask.data);

    auto [source2, forged2] = generate_forged(seed, 64);
    CHECK(forged2.image.data == forged.image.data);
    CHECK(source2.image.data == source.image.data);
  }
}

TEST_CASE("forged region carries more high-frequency energy than the source region") {
  for (uint64_t seed : {3ull, 17ull, 1001ull}) {
    auto [source, forged] = generate_forged(seed, 64);
    Image cue_src = frequency_cue(source.image, {0.33});
    Image cue_fgd = frequency_cue(forged.image, {0.33});
    double e_src = 0.0, e_fgd = 0.0;
    long n = 0;
    for (size_t i = 0; i < forged.mask.data.size(); ++i) {
      if (forged.mask.data[i] != 1.0) continue;
      e_src += std::fabs(cue_src.data[i]);
      e_fgd += std::fabs(cue_fgd.data[i]);
      ++n;
    }
    CHECK(n > 0);
    CHECK(e_fgd / n > e_src / n);
  }
}

TEST_CASE("corpus generation: balance, manifest, masks, bit-exact regeneration") {
  const std::string dir = testutil::scratch_dir("datagen_corpus");
  generate_corpus(dir, 9, 32, 77);

  auto manifest = load_manifest(dir);
  REQUIRE(manifest.size() == 9);
  int reals = 0, forged = 0;
  for (const auto& e : manifest) (e.label == 0 ? reals : forged) += 1;
  CHECK(reals == 5);  // ceil(9/2)
  CHECK(forged == 4);

  for (const auto& e : manifest) {
    const std::string img_path = dir + "/" + e.image_path;
    CHECK(std::filesystem::exists(img_path));
    CHECK(std::filesystem::exists(mask_path(dir, e)));
  }

  // regeneration into a fresh directory is byte-identical
  const std::string dir2 = testutil::scratch_dir("datagen_corpus2");
  generate_corpus(dir2, 9, 32, 77);
  for (const auto& e : manifest) {
    CHECK(file_bytes(dir + "/" + e.image_path) == file_bytes(dir2 + "/" + e.image_path));
    CHECK(file_bytes(mask_path(dir, e)) == file_bytes(mask_path(dir2, e)));
  }
  CHECK(file_bytes(dir + "/manifest.csv") == file_bytes(dir2 + "/manifest.csv"));
}
