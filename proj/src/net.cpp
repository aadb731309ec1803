#include "locrel/net.hpp"

#include <cassert>
#include <cmath>

#include "locrel/error.hpp"
#include "locrel/mpsm.hpp"
#include "locrel/rng.hpp"

namespace locrel::net {

diff::Tensor ParamStore::create_param(const std::string& name, std::vector<int> shape) {
  diff::Tensor t = diff::Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  params_.emplace_back(name, t);
  return t;
}

void ParamStore::register_buffer(const std::string& name, std::vector<double>* buf) {
  buffers_.emplace_back(name, buf);
}

void NetConfig::validate() const {
  if (image_size < 16 || image_size % 8 != 0) {
    throw ConfigError("image_size must be a multiple of 8 and at least 16");
  }
  if (k < 1) throw ConfigError("k must be >= 1");
  if (k > image_size / 8) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the high-stage extent " +
                      std::to_string(image_size / 8));
  }
  for (int w : widths) {
    if (w < 1) throw ConfigError("stage widths must be positive");
  }
}

namespace {

struct Init {
  Rng rng;
  ParamStore& store;

  diff::Tensor conv_w(const std::string& name, int kh, int kw, int cin, int cout) {
    diff::Tensor w = store.create_param(name, {kh, kw, cin, cout});
    const double stddev = std::sqrt(2.0 / (static_cast<double>(kh) * kw * cin));
    for (double& v : w.values()) v = rng.normal(0.0, stddev);
    return w;
  }
  diff::Tensor dense_w(const std::string& name, int in, int out) {
    diff::Tensor w = store.create_param(name, {in, out});
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    for (double& v : w.values()) v = rng.normal(0.0, stddev);
    return w;
  }
  diff::Tensor zeros(const std::string& name, int n) { return store.create_param(name, {n}); }
  diff::Tensor ones(const std::string& name, int n) {
    diff::Tensor t = store.create_param(name, {n});
    std::fill(t.values().begin(), t.values().end(), 1.0);
    return t;
  }
};

}  // namespace

TwoStreamNet::TwoStreamNet(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Init init{Rng(cfg_.seed), store_};

  auto make_stage = [&](const std::string& prefix, int cin, int width) {
    StageBlock s;
    s.c1.w = init.conv_w(prefix + ".conv1.w", 3, 3, cin, width);
    s.c1.b = init.zeros(prefix + ".conv1.b", width);
    s.b1.gamma = init.ones(prefix + ".bn1.gamma", width);
    s.b1.beta = init.zeros(prefix + ".bn1.beta", width);
    s.c2.w = init.conv_w(prefix + ".conv2.w", 3, 3, width, width);
    s.c2.b = init.zeros(prefix + ".conv2.b", width);
    s.b2.gamma = init.ones(prefix + ".bn2.gamma", width);
    s.b2.beta = init.zeros(prefix + ".bn2.beta", width);
    return s;
  };

  const auto& w = cfg_.widths;
  rgb_stages_[0] = make_stage("rgb.s1", 3, w[0]);
  rgb_stages_[1] = make_stage("rgb.s2", w[0], w[1]);
  rgb_stages_[2] = make_stage("rgb.s3", w[1], w[2]);

  if (!cfg_.rgb_baseline) {
    freq_stages_[0] = make_stage("freq.s1", 1, w[0]);
    freq_stages_[1] = make_stage("freq.s2", w[0], w[1]);
    freq_stages_[2] = make_stage("freq.s3", w[1], w[2]);
    for (int i = 0; i < 3; ++i) {
      const std::string prefix = "rfam" + std::to_string(i + 1);
      const int c2 = 2 * w[i];
      rfams_[i].fuse.w = init.conv_w(prefix + ".fuse.w", 1, 1, c2, c2);
      rfams_[i].fuse.b = init.zeros(prefix + ".fuse.b", c2);
      rfams_[i].bn.gamma = init.ones(prefix + ".bn.gamma", c2);
      rfams_[i].bn.beta = init.zeros(prefix + ".bn.beta", c2);
      rfams_[i].attn.w = init.conv_w(prefix + ".attn.w", 3, 3, c2, 2);
      rfams_[i].attn.b = init.zeros(prefix + ".attn.b", 2);
    }
  }

  // decoder: up+skip(mid), up+skip(low), up, then 1x1 to a single map
  const int dmid = w[2] + w[1];
  const int dlow = w[1] + w[0];
  dec_[0].conv.w = init.conv_w("dec1.conv.w", 3, 3, dmid, w[1]);
  dec_[0].conv.b = init.zeros("dec1.conv.b", w[1]);
  dec_[0].bn.gamma = init.ones("dec1.bn.gamma", w[1]);
  dec_[0].bn.beta = init.zeros("dec1.bn.beta", w[1]);
  dec_[1].conv.w = init.conv_w("dec2.conv.w", 3, 3, dlow, w[0]);
  dec_[1].conv.b = init.zeros("dec2.conv.b", w[0]);
  dec_[1].bn.gamma = init.ones("dec2.bn.gamma", w[0]);
  dec_[1].bn.beta = init.zeros("dec2.bn.beta", w[0]);
  const int dtop = std::max(w[0] / 2, 4);
  dec_[2].conv.w = init.conv_w("dec3.conv.w", 3, 3, w[0], dtop);
  dec_[2].conv.b = init.zeros("dec3.conv.b", dtop);
  dec_[2].bn.gamma = init.ones("dec3.bn.gamma", dtop);
  dec_[2].bn.beta = init.zeros("dec3.bn.beta", dtop);
  dec_final_.w = init.conv_w("dec_out.w", 1, 1, dtop, 1);
  dec_final_.b = init.zeros("dec_out.b", 1);

  const int head_in = cfg_.rgb_baseline ? w[2] : cfg_.k * cfg_.k * cfg_.k * cfg_.k;
  head_w1 = init.dense_w("head.fc1.w", head_in, 64);
  head_b1 = init.zeros("head.fc1.b", 64);
  head_w2 = init.dense_w("head.fc2.w", 64, 1);
  head_b2 = init.zeros("head.fc2.b", 1);

  // running statistics live in the layer structs; register after all params
  auto reg_bn = [&](const std::string& prefix, Bn& bn) {
    store_.register_buffer(prefix + ".running_mean", &bn.stats.mean);
    store_.register_buffer(prefix + ".running_var", &bn.stats.var);
    bn.stats.mean.assign(static_cast<size_t>(bn.gamma.numel()), 0.0);
    bn.stats.var.assign(static_cast<size_t>(bn.gamma.numel()), 1.0);
  };
  for (int i = 0; i < 3; ++i) {
    const std::string p = "rgb.s" + std::to_string(i + 1);
    reg_bn(p + ".bn1", rgb_stages_[i].b1);
    reg_bn(p + ".bn2", rgb_stages_[i].b2);
  }
  if (!cfg_.rgb_baseline) {
    for (int i = 0; i < 3; ++i) {
      const std::string p = "freq.s" + std::to_string(i + 1);
      reg_bn(p + ".bn1", freq_stages_[i].b1);
      reg_bn(p + ".bn2", freq_stages_[i].b2);
      reg_bn("rfam" + std::to_string(i + 1) + ".bn", rfams_[i].bn);
    }
  }
  for (int i = 0; i < 3; ++i) reg_bn("dec" + std::to_string(i + 1) + ".bn", dec_[i].bn);
}

diff::Tensor TwoStreamNet::stage_forward(diff::Tape& tape, StageBlock& s, const diff::Tensor& x,
                                         bool training) {
  diff::Tensor h = diff::conv2d(tape, x, s.c1.w, s.c1.b, 1, 1);
  h = diff::batchnorm_relu(tape, h, s.b1.gamma, s.b1.beta, s.b1.stats, training);
  h = diff::conv2d(tape, h, s.c2.w, s.c2.b, 1, 1);
  h = diff::batchnorm_relu(tape, h, s.b2.gamma, s.b2.beta, s.b2.stats, training);
  return diff::avgpool2x2(tape, h);
}

RfamOutput TwoStreamNet::rfam(diff::Tape& tape, int stage, const diff::Tensor& u1,
                              const diff::Tensor& u2, bool training) {
  if (u1.shape() != u2.shape()) {
    throw DimensionError("rfam: stream feature maps must share a shape");
  }
  Rfam& r = rfams_[stage];
  diff::Tensor u = diff::concat_channels(tape, {u1, u2});
  diff::Tensor v = diff::conv2d(tape, u, r.fuse.w, r.fuse.b, 1, 0);
  v = diff::batchnorm_relu(tape, v, r.bn.gamma, r.bn.beta, r.bn.stats, training);
  diff::Tensor a = diff::sigmoid(tape, diff::conv2d(tape, v, r.attn.w, r.attn.b, 1, 1));
  std::vector<diff::Tensor> parts = diff::split_channels(tape, a, {1, 1});
  RfamOutput out;
  out.a1 = parts[0];
  out.a2 = parts[1];
  out.fused = diff::add(tape, diff::mul(tape, u1, out.a1), diff::mul(tape, u2, out.a2));
#ifndef NDEBUG
  {
    // fused must equal the broadcast weighted sum exactly (recomputed here)
    const int c = u1.dim(3);
    const long rows = u1.numel() / c;
    for (long rI = 0; rI < rows; ++rI) {
      for (int ch = 0; ch < c; ++ch) {
        const double want = out.a1.data()[rI] * u1.data()[rI * c + ch] +
                            out.a2.data()[rI] * u2.data()[rI * c + ch];
        assert(std::fabs(out.fused.data()[rI * c + ch] - want) <= 1e-12);
      }
    }
  }
#endif
  return out;
}

diff::Tensor TwoStreamNet::decode(diff::Tape& tape, const std::array<diff::Tensor, 3>& feats,
                                  bool training) {
  const diff::Tensor& low = feats[0];
  const diff::Tensor& mid = feats[1];
  const diff::Tensor& high = feats[2];

  diff::Tensor d = diff::resize_bilinear(tape, high, mid.dim(1), mid.dim(2));
  d = diff::concat_channels(tape, {d, mid});
  d = diff::conv2d(tape, d, dec_[0].conv.w, dec_[0].conv.b, 1, 1);
  d = diff::batchnorm_relu(tape, d, dec_[0].bn.gamma, dec_[0].bn.beta, dec_[0].bn.stats,
                           training);

  d = diff::resize_bilinear(tape, d, low.dim(1), low.dim(2));
  d = diff::concat_channels(tape, {d, low});
  d = diff::conv2d(tape, d, dec_[1].conv.w, dec_[1].conv.b, 1, 1);
  d = diff::batchnorm_relu(tape, d, dec_[1].bn.gamma, dec_[1].bn.beta, dec_[1].bn.stats,
                           training);

  d = diff::resize_bilinear(tape, d, cfg_.image_size, cfg_.image_size);
  d = diff::conv2d(tape, d, dec_[2].conv.w, dec_[2].conv.b, 1, 1);
  d = diff::batchnorm_relu(tape, d, dec_[2].bn.gamma, dec_[2].bn.beta, dec_[2].bn.stats,
                           training);

  return diff::sigmoid(tape, diff::conv2d(tape, d, dec_final_.w, dec_final_.b, 1, 0));
}

TwoStreamNet::Output TwoStreamNet::forward(diff::Tape& tape, const diff::Tensor& x1,
                                           const diff::Tensor& x2, bool training) {
  if (!x1.defined() || x1.ndim() != 4 || x1.dim(3) != 3 || x1.dim(1) != cfg_.image_size ||
      x1.dim(2) != cfg_.image_size) {
    throw DimensionError("forward: x1 must be [N," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + ",3]");
  }
  Output out;
  if (cfg_.rgb_baseline) {
    diff::Tensor r1 = stage_forward(tape, rgb_stages_[0], x1, training);
    diff::Tensor r2 = stage_forward(tape, rgb_stages_[1], r1, training);
    diff::Tensor r3 = stage_forward(tape, rgb_stages_[2], r2, training);
    out.fused = {r1, r2, r3};
    diff::Tensor pooled = diff::global_avgpool(tape, r3);
    diff::Tensor hgt = diff::relu(tape, diff::dense(tape, pooled, head_w1, head_b1));
    out.y_hat = diff::sigmoid(tape, diff::dense(tape, hgt, head_w2, head_b2));
    out.mask_hat = decode(tape, out.fused, training);
    return out;
  }

  if (!x2.defined() || x2.ndim() != 4 || x2.dim(3) != 1) {
    throw DimensionError("forward: x2 must be [N,S,S,1]");
  }
  if (x2.dim(0) != x1.dim(0) || x2.dim(1) != x1.dim(1) || x2.dim(2) != x1.dim(2)) {
    throw DimensionError("forward: x1/x2 extents disagree");
  }

  diff::Tensor r = x1, f = x2;
  std::array<diff::Tensor, 3> fused;
  for (int i = 0; i < 3; ++i) {
    r = stage_forward(tape, rgb_stages_[i], r, training);
    f = stage_forward(tape, freq_stages_[i], f, training);
    fused[i] = rfam(tape, i, f, r, training).fused;
  }
  out.fused = fused;

  diff::Tensor ms = mpsm::fuse_multiscale(tape, fused[0], fused[1], fused[2]);
  diff::Tensor patches = mpsm::partition(tape, ms, cfg_.k);
  out.s_hat = mpsm::similarity_pattern(tape, patches);

  // standardize the pattern for the head: entries hover near 1 and the
  // class signal lives in ~0.1-scale deviations
  diff::Tensor flat = diff::flatten(tape, diff::affine(tape, out.s_hat, 10.0, -10.0));
  diff::Tensor hgt = diff::relu(tape, diff::dense(tape, flat, head_w1, head_b1));
  out.y_hat = diff::sigmoid(tape, diff::dense(tape, hgt, head_w2, head_b2));

  out.mask_hat = decode(tape, fused, training);
  return out;
}

}  // namespace locrel::net
