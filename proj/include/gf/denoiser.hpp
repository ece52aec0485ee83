#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gf/nn.hpp"

// x0-predicting denoiser: a small 3D conv encoder-decoder with two resolution
// levels, additive residual skips and a sinusoidal time embedding injected at
// each level. Input = noisy coefficients concatenated with the wavelet
// transform of the masked condition (2*C channels); output = C channels.

namespace gf {

inline constexpr int kTimeEmbedDim = 32;

template <typename Real>
class DenoiserNet {
 public:
  DenoiserNet() = default;
  DenoiserNet(int in_channels, int out_channels, int width, std::uint64_t seed) {
    build(in_channels, out_channels, width, seed);
  }

  void build(int in_channels, int out_channels, int width, std::uint64_t seed) {
    in_ch_ = in_channels;
    out_ch_ = out_channels;
    width_ = width;
    Rng rng(seed);
    // The layers keep pointers into the store; heap allocation keeps them
    // valid when the net itself is moved.
    store_ = std::make_unique<nn::ParamStore<Real>>();
    emb_enc_.init(*store_, kTimeEmbedDim, width, rng);
    emb_mid_.init(*store_, kTimeEmbedDim, 2 * width, rng);
    proj_in_.init(*store_, in_channels, width, rng);
    enc_a_.init(*store_, width, width, rng);
    enc_b_.init(*store_, width, width, rng);
    down_proj_.init(*store_, width, 2 * width, rng);
    mid_a_.init(*store_, 2 * width, 2 * width, rng);
    mid_b_.init(*store_, 2 * width, 2 * width, rng);
    up_proj_.init(*store_, 2 * width, width, rng);
    dec_a_.init(*store_, width, width, rng);
    dec_b_.init(*store_, width, width, rng);
    proj_out_.init(*store_, width, out_channels, rng, /*zero=*/true);
  }

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int width() const { return width_; }

  std::vector<Real>& parameters() { return store_->params; }
  const std::vector<Real>& parameters() const { return store_->params; }
  std::vector<Real>& gradients() { return store_->grads; }
  void zero_gradients() { store_->zero_grads(); }

  // Forward pass; activations are cached for a subsequent backward().
  const nn::Tensor<Real>& forward(const nn::Tensor<Real>& x, int t) {
    if (x.c != in_ch_) throw std::invalid_argument("DenoiserNet: wrong input channel count");
    if (x.d % 2 || x.h % 2 || x.w % 2) throw std::invalid_argument("DenoiserNet: spatial dims must be even");
    pe_ = nn::sinusoidal_embedding<Real>(t, kTimeEmbedDim);
    e_enc_ = emb_enc_.forward(pe_);
    e_mid_ = emb_mid_.forward(pe_);

    x_ = x;
    proj_in_.forward(x_, h0_);
    add_channel_bias(h0_, e_enc_);
    enc_a_.forward(h0_, za_);
    nn::silu_forward(za_, aa_);
    enc_b_.forward(aa_, zb_);
    add_tensor(zb_, h0_, rb_);  // rb = zb + h0 (pre-activation of the residual)
    nn::silu_forward(rb_, h1_);

    nn::avgpool2_forward(h1_, pool_);
    down_proj_.forward(pool_, m0_);
    add_channel_bias(m0_, e_mid_);
    mid_a_.forward(m0_, zc_);
    nn::silu_forward(zc_, ac_);
    mid_b_.forward(ac_, zd_);
    add_tensor(zd_, m0_, rd_);
    nn::silu_forward(rd_, h2_);

    up_proj_.forward(h2_, upin_);
    nn::upsample2_forward(upin_, up_);
    add_tensor(up_, h1_, s_);
    dec_a_.forward(s_, ze_);
    nn::silu_forward(ze_, ae_);
    dec_b_.forward(ae_, zf_);
    add_tensor(zf_, s_, rf_);
    nn::silu_forward(rf_, h3_);

    proj_out_.forward(h3_, y_);
    return y_;
  }

  // Accumulates parameter gradients for the cached forward pass.
  void backward(const nn::Tensor<Real>& gy) {
    nn::Tensor<Real> g_h3;
    proj_out_.backward(h3_, gy, &g_h3);

    nn::Tensor<Real> g_rf;
    nn::silu_backward(rf_, g_h3, g_rf);
    nn::Tensor<Real> g_ae;
    dec_b_.backward(ae_, g_rf, &g_ae);
    nn::Tensor<Real> g_ze;
    nn::silu_backward(ze_, g_ae, g_ze);
    nn::Tensor<Real> g_s;
    dec_a_.backward(s_, g_ze, &g_s);
    add_into(g_s, g_rf);  // skip branch of rf = zf + s

    // s = up + h1
    nn::Tensor<Real> g_h2;
    {
      nn::Tensor<Real> g_upin;
      nn::upsample2_backward(g_s, g_upin, upin_.d, upin_.h, upin_.w);
      up_proj_.backward(h2_, g_upin, &g_h2);
    }

    nn::Tensor<Real> g_rd;
    nn::silu_backward(rd_, g_h2, g_rd);
    nn::Tensor<Real> g_ac;
    mid_b_.backward(ac_, g_rd, &g_ac);
    nn::Tensor<Real> g_zc;
    nn::silu_backward(zc_, g_ac, g_zc);
    nn::Tensor<Real> g_m0;
    mid_a_.backward(m0_, g_zc, &g_m0);
    add_into(g_m0, g_rd);  // skip branch of rd = zd + m0

    reduce_channel_bias(g_m0, ge_mid_);
    emb_mid_.backward(pe_, ge_mid_);

    nn::Tensor<Real> g_pool;
    down_proj_.backward(pool_, g_m0, &g_pool);
    nn::Tensor<Real> g_h1;
    nn::avgpool2_backward(g_pool, g_h1, h1_.d, h1_.h, h1_.w);
    add_into(g_h1, g_s);  // h1 also feeds the decoder skip

    nn::Tensor<Real> g_rb;
    nn::silu_backward(rb_, g_h1, g_rb);
    nn::Tensor<Real> g_aa;
    enc_b_.backward(aa_, g_rb, &g_aa);
    nn::Tensor<Real> g_za;
    nn::silu_backward(za_, g_aa, g_za);
    nn::Tensor<Real> g_h0;
    enc_a_.backward(h0_, g_za, &g_h0);
    add_into(g_h0, g_rb);  // skip branch of rb = zb + h0

    reduce_channel_bias(g_h0, ge_enc_);
    emb_enc_.backward(pe_, ge_enc_);

    proj_in_.backward(x_, g_h0, nullptr);
  }

 private:
  static void add_channel_bias(nn::Tensor<Real>& t, const std::vector<Real>& bias) {
    const std::size_t sp = t.spatial();
    for (int c = 0; c < t.c; ++c) {
      Real* p = t.channel(c);
      const Real b = bias[c];
      for (std::size_t i = 0; i < sp; ++i) p[i] += b;
    }
  }
  static void reduce_channel_bias(const nn::Tensor<Real>& g, std::vector<Real>& out) {
    out.assign(static_cast<std::size_t>(g.c), Real(0));
    const std::size_t sp = g.spatial();
    for (int c = 0; c < g.c; ++c) {
      const Real* p = g.channel(c);
      Real acc = 0;
      for (std::size_t i = 0; i < sp; ++i) acc += p[i];
      out[c] = acc;
    }
  }
  static void add_tensor(const nn::Tensor<Real>& a, const nn::Tensor<Real>& b, nn::Tensor<Real>& out) {
    out.resize(a.c, a.d, a.h, a.w);
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] + b.v[i];
  }
  static void add_into(nn::Tensor<Real>& dst, const nn::Tensor<Real>& src) {
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
  }

  int in_ch_ = 0, out_ch_ = 0, width_ = 0;
  std::unique_ptr<nn::ParamStore<Real>> store_ = std::make_unique<nn::ParamStore<Real>>();
  nn::Linear<Real> emb_enc_, emb_mid_;
  nn::Conv1<Real> proj_in_, down_proj_, up_proj_, proj_out_;
  nn::Conv3<Real> enc_a_, enc_b_, mid_a_, mid_b_, dec_a_, dec_b_;

  // forward cache
  std::vector<Real> pe_, e_enc_, e_mid_, ge_enc_, ge_mid_;
  nn::Tensor<Real> x_, h0_, za_, aa_, zb_, rb_, h1_, pool_, m0_, zc_, ac_, zd_, rd_, h2_;
  nn::Tensor<Real> upin_, up_, s_, ze_, ae_, zf_, rf_, h3_, y_;
};

}  // namespace gf
