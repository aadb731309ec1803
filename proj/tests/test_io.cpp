#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locrel/checkpoint.hpp"
#include "locrel/error.hpp"
#include "locrel/image_io.hpp"
#include "locrel/net.hpp"
#include "locrel/rng.hpp"
#include "support/test_util.hpp"

using namespace locrel;

namespace {

// values already on the 1/255 grid survive a save/load round trip exactly
Image quantized_random(Rng& rng, int h, int w, int c) {
  Image img(h, w, c);
  for (double& v : img.data) v = static_cast<double>(rng.uniform_int(256)) / 255.0;
  return img;
}

}  // namespace

TEST_CASE("PNG round trip is exact on the 8-bit grid") {
  Rng rng(1);
  const std::string dir = testutil::scratch_dir("io_png");
  for (int channels : {1, 3}) {
    Image img = quantized_random(rng, 13, 17, channels);
    const std::string path = dir + "/img" + std::to_string(channels) + ".png";
    save_image(img, path);
    Image back = load_image(path);
    CHECK(back.height == 13);
    CHECK(back.width == 17);
    CHECK(back.channels == channels);
    CHECK(testutil::max_abs_diff(img.data, back.data) == 0.0);
  }
}

TEST_CASE("PGM/PPM round trips and save clamping") {
  Rng rng(2);
  const std::string dir = testutil::scratch_dir("io_pnm");
  Image gray = quantized_random(rng, 9, 11, 1);
  save_image(gray, dir + "/g.pgm");
  CHECK(testutil::max_abs_diff(load_image(dir + "/g.pgm").data, gray.data) == 0.0);

  Image rgb = quantized_random(rng, 9, 11, 3);
  save_image(rgb, dir + "/c.ppm");
  CHECK(testutil::max_abs_diff(load_image(dir + "/c.ppm").data, rgb.data) == 0.0);

  Image wild(8, 8, 1);
  for (size_t i = 0; i < wild.data.size(); ++i) wild.data[i] = (i % 2 ? 3.7 : -0.9);
  save_image(wild, dir + "/w.pgm");
  Image back = load_image(dir + "/w.pgm");
  for (size_t i = 0; i < back.data.size(); ++i) CHECK(back.data[i] == (i % 2 ? 1.0 : 0.0));

  CHECK_THROWS_AS(save_image(rgb, dir + "/c.pgm"), DimensionError);
  CHECK_THROWS_AS(load_image(dir + "/missing.png"), IoError);
}

TEST_CASE("mask PGM stores {0,255} and loads back to {0,1}") {
  const std::string dir = testutil::scratch_dir("io_mask");
  Image mask(10, 10, 1);
  for (size_t i = 0; i < mask.data.size(); i += 3) mask.data[i] = 1.0;
  save_mask_pgm(mask, dir + "/m.pgm");
  Image back = load_mask_pgm(dir + "/m.pgm");
  CHECK(back.data == mask.data);
}

TEST_CASE("checkpoint: save, peek, load round trip") {
  const std::string dir = testutil::scratch_dir("io_ckpt");
  net::NetConfig cfg;
  cfg.image_size = 32;
  cfg.k = 4;
  cfg.seed = 5;
  net::TwoStreamNet network(cfg);

  // nudge a parameter and a running stat so the round trip is non-trivial
  diff::Tensor some_param = network.store().params()[3].second;
  some_param.values()[0] = 0.73125;
  *network.store().buffers()[0].second = std::vector<double>(
      network.store().buffers()[0].second->size(), 0.25);

  checkpoint::Meta meta;
  meta.net = cfg;
  meta.alpha = 0.41;
  checkpoint::save(dir + "/ck.bin", meta, network.store());

  const checkpoint::Meta peeked = checkpoint::peek(dir + "/ck.bin");
  CHECK(peeked.net.image_size == 32);
  CHECK(peeked.net.k == 4);
  CHECK(peeked.net.rgb_baseline == false);
  CHECK(peeked.alpha == 0.41);

  net::TwoStreamNet restored(peeked.net);
  checkpoint::load_into(dir + "/ck.bin", restored);
  const auto& a = network.store().params();
  const auto& b = restored.store().params();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.values() == b[i].second.values());
  }
  for (size_t i = 0; i < network.store().buffers().size(); ++i) {
    CHECK(*network.store().buffers()[i].second == *restored.store().buffers()[i].second);
  }
}

TEST_CASE("checkpoint load rejects architecture mismatches") {
  const std::string dir = testutil::scratch_dir("io_ckpt_mismatch");
  net::NetConfig cfg;
  cfg.image_size = 32;
  cfg.k = 4;
  net::TwoStreamNet network(cfg);
  checkpoint::Meta meta;
  meta.net = cfg;
  checkpoint::save(dir + "/ck.bin", meta, network.store());

  net::NetConfig other = cfg;
  other.k = 2;
  net::TwoStreamNet wrong(other);
  CHECK_THROWS_AS(checkpoint::load_into(dir + "/ck.bin", wrong), IoError);

  CHECK_THROWS_AS(checkpoint::peek(dir + "/nothere.bin"), IoError);
}
