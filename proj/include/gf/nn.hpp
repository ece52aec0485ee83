#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gf/parallel.hpp"
#include "gf/rng.hpp"

// Minimal 3D conv building blocks for the diffusion denoiser, templated on
// the scalar type: float for training speed, double for finite-difference
// gradient checks. All parameters live in one flat store so the optimizer,
// checkpointing and gradient tests can treat the network as a single vector.

namespace gf::nn {

template <typename Real>
struct Tensor {
  int c = 0, d = 0, h = 0, w = 0;  // channels, z, y, x
  std::vector<Real> v;

  Tensor() = default;
  Tensor(int c_, int d_, int h_, int w_) { resize(c_, d_, h_, w_); }

  void resize(int c_, int d_, int h_, int w_) {
    c = c_;
    d = d_;
    h = h_;
    w = w_;
    v.assign(static_cast<std::size_t>(c) * d * h * w, Real(0));
  }
  std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
  Real* channel(int ch) { return v.data() + static_cast<std::size_t>(ch) * spatial(); }
  const Real* channel(int ch) const { return v.data() + static_cast<std::size_t>(ch) * spatial(); }
  bool same_shape(const Tensor& o) const { return c == o.c && d == o.d && h == o.h && w == o.w; }
};

template <typename Real>
struct ParamStore {
  std::vector<Real> params, grads;

  std::size_t alloc(std::size_t n) {
    const std::size_t off = params.size();
    params.resize(off + n, Real(0));
    grads.resize(off + n, Real(0));
    return off;
  }
  void zero_grads() { std::fill(grads.begin(), grads.end(), Real(0)); }
};

// 3x3x3 convolution, stride 1, zero padding 1.
template <typename Real>
struct Conv3 {
  int ic = 0, oc = 0;
  std::size_t w_off = 0, b_off = 0;
  ParamStore<Real>* store = nullptr;

  void init(ParamStore<Real>& s, int in_ch, int out_ch, Rng& rng, double gain = 1.0) {
    store = &s;
    ic = in_ch;
    oc = out_ch;
    const std::size_t nw = static_cast<std::size_t>(oc) * ic * 27;
    w_off = s.alloc(nw);
    b_off = s.alloc(static_cast<std::size_t>(oc));
    const double bound = gain * std::sqrt(1.0 / (ic * 27.0));
    for (std::size_t i = 0; i < nw; ++i) {
      s.params[w_off + i] = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }

  void forward(const Tensor<Real>& x, Tensor<Real>& y) const {
    y.resize(oc, x.d, x.h, x.w);
    const Real* W = store->params.data() + w_off;
    const Real* B = store->params.data() + b_off;
    const int D = x.d, H = x.h, Wd = x.w;
    parallel_for(oc, [&](std::int64_t o) {
      Real* yo = y.channel(static_cast<int>(o));
      const std::size_t sp = y.spatial();
      for (std::size_t p = 0; p < sp; ++p) yo[p] = B[o];
      for (int i = 0; i < ic; ++i) {
        const Real* xi = x.channel(i);
        const Real* wk = W + (static_cast<std::size_t>(o) * ic + i) * 27;
        for (int kz = 0; kz < 3; ++kz) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const Real wv = wk[(kz * 3 + ky) * 3 + kx];
              if (wv == Real(0)) continue;
              const int dz = kz - 1, dy = ky - 1, dx = kx - 1;
              const int z0 = std::max(0, -dz), z1 = std::min(D, D - dz);
              const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
              const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
              for (int z = z0; z < z1; ++z) {
                for (int yy = y0; yy < y1; ++yy) {
                  Real* dst = yo + (static_cast<std::size_t>(z) * H + yy) * Wd;
                  const Real* src = xi + (static_cast<std::size_t>(z + dz) * H + (yy + dy)) * Wd + dx;
                  for (int xx = x0; xx < x1; ++xx) dst[xx] += wv * src[xx];
                }
              }
            }
          }
        }
      }
    }, 1);
  }

  // gx may be null when the input gradient is not needed (first layer).
  void backward(const Tensor<Real>& x, const Tensor<Real>& gy, Tensor<Real>* gx) const {
    Real* GW = store->grads.data() + w_off;
    Real* GB = store->grads.data() + b_off;
    const int D = x.d, H = x.h, Wd = x.w;

    parallel_for(oc, [&](std::int64_t o) {
      const Real* go = gy.channel(static_cast<int>(o));
      Real acc_b = 0;
      const std::size_t sp = x.spatial();
      for (std::size_t p = 0; p < sp; ++p) acc_b += go[p];
      GB[o] += acc_b;
      for (int i = 0; i < ic; ++i) {
        const Real* xi = x.channel(i);
        Real* gw = GW + (static_cast<std::size_t>(o) * ic + i) * 27;
        for (int kz = 0; kz < 3; ++kz) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int dz = kz - 1, dy = ky - 1, dx = kx - 1;
              const int z0 = std::max(0, -dz), z1 = std::min(D, D - dz);
              const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
              const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
              Real acc = 0;
              for (int z = z0; z < z1; ++z) {
                for (int yy = y0; yy < y1; ++yy) {
                  const Real* gdst = go + (static_cast<std::size_t>(z) * H + yy) * Wd;
                  const Real* src = xi + (static_cast<std::size_t>(z + dz) * H + (yy + dy)) * Wd + dx;
                  for (int xx = x0; xx < x1; ++xx) acc += gdst[xx] * src[xx];
                }
              }
              gw[(kz * 3 + ky) * 3 + kx] += acc;
            }
          }
        }
      }
    }, 1);

    if (!gx) return;
    gx->resize(ic, D, H, Wd);
    const Real* W = store->params.data() + w_off;
    parallel_for(ic, [&](std::int64_t i) {
      Real* gxi = gx->channel(static_cast<int>(i));
      for (int o = 0; o < oc; ++o) {
        const Real* go = gy.channel(o);
        const Real* wk = W + (static_cast<std::size_t>(o) * ic + i) * 27;
        for (int kz = 0; kz < 3; ++kz) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const Real wv = wk[(kz * 3 + ky) * 3 + kx];
              if (wv == Real(0)) continue;
              const int dz = kz - 1, dy = ky - 1, dx = kx - 1;
              // gx[p] += w * gy[p - delta]: same ranges as forward, swapped roles
              const int z0 = std::max(0, -dz), z1 = std::min(D, D - dz);
              const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
              const int x0 = std::max(0, -dx), x1 = std::min(Wd, Wd - dx);
              for (int z = z0; z < z1; ++z) {
                for (int yy = y0; yy < y1; ++yy) {
                  const Real* gsrc = go + (static_cast<std::size_t>(z) * H + yy) * Wd;
                  Real* gdst = gxi + (static_cast<std::size_t>(z + dz) * H + (yy + dy)) * Wd + dx;
                  for (int xx = x0; xx < x1; ++xx) gdst[xx] += wv * gsrc[xx];
                }
              }
            }
          }
        }
      }
    }, 1);
  }
};

// 1x1x1 projection.
template <typename Real>
struct Conv1 {
  int ic = 0, oc = 0;
  std::size_t w_off = 0, b_off = 0;
  ParamStore<Real>* store = nullptr;

  void init(ParamStore<Real>& s, int in_ch, int out_ch, Rng& rng, bool zero = false) {
    store = &s;
    ic = in_ch;
    oc = out_ch;
    const std::size_t nw = static_cast<std::size_t>(oc) * ic;
    w_off = s.alloc(nw);
    b_off = s.alloc(static_cast<std::size_t>(oc));
    if (!zero) {
      const double bound = std::sqrt(1.0 / ic);
      for (std::size_t i = 0; i < nw; ++i) {
        s.params[w_off + i] = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
      }
    }
  }

  void forward(const Tensor<Real>& x, Tensor<Real>& y) const {
    y.resize(oc, x.d, x.h, x.w);
    const Real* W = store->params.data() + w_off;
    const Real* B = store->params.data() + b_off;
    const std::size_t sp = x.spatial();
    parallel_for(oc, [&](std::int64_t o) {
      Real* yo = y.channel(static_cast<int>(o));
      for (std::size_t p = 0; p < sp; ++p) yo[p] = B[o];
      for (int i = 0; i < ic; ++i) {
        const Real wv = W[static_cast<std::size_t>(o) * ic + i];
        const Real* xi = x.channel(i);
        for (std::size_t p = 0; p < sp; ++p) yo[p] += wv * xi[p];
      }
    }, 1);
  }

  void backward(const Tensor<Real>& x, const Tensor<Real>& gy, Tensor<Real>* gx) const {
    Real* GW = store->grads.data() + w_off;
    Real* GB = store->grads.data() + b_off;
    const std::size_t sp = x.spatial();
    parallel_for(oc, [&](std::int64_t o) {
      const Real* go = gy.channel(static_cast<int>(o));
      Real acc_b = 0;
      for (std::size_t p = 0; p < sp; ++p) acc_b += go[p];
      GB[o] += acc_b;
      for (int i = 0; i < ic; ++i) {
        const Real* xi = x.channel(i);
        Real acc = 0;
        for (std::size_t p = 0; p < sp; ++p) acc += go[p] * xi[p];
        GW[static_cast<std::size_t>(o) * ic + i] += acc;
      }
    }, 1);
    if (!gx) return;
    gx->resize(ic, x.d, x.h, x.w);
    const Real* W = store->params.data() + w_off;
    parallel_for(ic, [&](std::int64_t i) {
      Real* gxi = gx->channel(static_cast<int>(i));
      for (int o = 0; o < oc; ++o) {
        const Real wv = W[static_cast<std::size_t>(o) * ic + i];
        const Real* go = gy.channel(o);
        for (std::size_t p = 0; p < sp; ++p) gxi[p] += wv * go[p];
      }
    }, 1);
  }
};

template <typename Real>
struct Linear {
  int in = 0, out = 0;
  std::size_t w_off = 0, b_off = 0;
  ParamStore<Real>* store = nullptr;

  void init(ParamStore<Real>& s, int in_, int out_, Rng& rng) {
    store = &s;
    in = in_;
    out = out_;
    w_off = s.alloc(static_cast<std::size_t>(out) * in);
    b_off = s.alloc(static_cast<std::size_t>(out));
    const double bound = std::sqrt(1.0 / in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(out) * in; ++i) {
      s.params[w_off + i] = static_cast<Real>((2.0 * rng.uniform() - 1.0) * bound);
    }
  }

  std::vector<Real> forward(const std::vector<Real>& x) const {
    std::vector<Real> y(static_cast<std::size_t>(out));
    const Real* W = store->params.data() + w_off;
    const Real* B = store->params.data() + b_off;
    for (int o = 0; o < out; ++o) {
      Real acc = B[o];
      for (int i = 0; i < in; ++i) acc += W[static_cast<std::size_t>(o) * in + i] * x[i];
      y[o] = acc;
    }
    return y;
  }

  std::vector<Real> backward(const std::vector<Real>& x, const std::vector<Real>& gy) const {
    Real* GW = store->grads.data() + w_off;
    Real* GB = store->grads.data() + b_off;
    const Real* W = store->params.data() + w_off;
    std::vector<Real> gx(static_cast<std::size_t>(in), Real(0));
    for (int o = 0; o < out; ++o) {
      GB[o] += gy[o];
      for (int i = 0; i < in; ++i) {
        GW[static_cast<std::size_t>(o) * in + i] += gy[o] * x[i];
        gx[i] += W[static_cast<std::size_t>(o) * in + i] * gy[o];
      }
    }
    return gx;
  }
};

// 2x average pooling; dims must be even.
template <typename Real>
void avgpool2_forward(const Tensor<Real>& x, Tensor<Real>& y) {
  if (x.d % 2 || x.h % 2 || x.w % 2) throw std::invalid_argument("avgpool2: odd spatial dims");
  y.resize(x.c, x.d / 2, x.h / 2, x.w / 2);
  const Real inv8 = Real(1) / Real(8);
  for (int c = 0; c < x.c; ++c) {
    const Real* xi = x.channel(c);
    Real* yo = y.channel(c);
    std::size_t n = 0;
    for (int z = 0; z < y.d; ++z) {
      for (int yy = 0; yy < y.h; ++yy) {
        for (int xx = 0; xx < y.w; ++xx, ++n) {
          Real acc = 0;
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              const Real* row = xi + (static_cast<std::size_t>(2 * z + dz) * x.h + (2 * yy + dy)) * x.w + 2 * xx;
              acc += row[0] + row[1];
            }
          }
          yo[n] = acc * inv8;
        }
      }
    }
  }
}

template <typename Real>
void avgpool2_backward(const Tensor<Real>& gy, Tensor<Real>& gx, int D, int H, int W) {
  gx.resize(gy.c, D, H, W);
  const Real inv8 = Real(1) / Real(8);
  for (int c = 0; c < gy.c; ++c) {
    const Real* go = gy.channel(c);
    Real* gi = gx.channel(c);
    std::size_t n = 0;
    for (int z = 0; z < gy.d; ++z) {
      for (int yy = 0; yy < gy.h; ++yy) {
        for (int xx = 0; xx < gy.w; ++xx, ++n) {
          const Real g = go[n] * inv8;
          for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
              Real* row = gi + (static_cast<std::size_t>(2 * z + dz) * H + (2 * yy + dy)) * W + 2 * xx;
              row[0] += g;
              row[1] += g;
            }
          }
        }
      }
    }
  }
}

// Nearest-neighbour 2x upsampling.
template <typename Real>
void upsample2_forward(const Tensor<Real>& x, Tensor<Real>& y) {
  y.resize(x.c, x.d * 2, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c) {
    const Real* xi = x.channel(c);
    Real* yo = y.channel(c);
    for (int z = 0; z < y.d; ++z) {
      for (int yy = 0; yy < y.h; ++yy) {
        const Real* src = xi + (static_cast<std::size_t>(z / 2) * x.h + yy / 2) * x.w;
        Real* dst = yo + (static_cast<std::size_t>(z) * y.h + yy) * y.w;
        for (int xx = 0; xx < y.w; ++xx) dst[xx] = src[xx / 2];
      }
    }
  }
}

template <typename Real>
void upsample2_backward(const Tensor<Real>& gy, Tensor<Real>& gx, int D, int H, int W) {
  gx.resize(gy.c, D, H, W);
  for (int c = 0; c < gy.c; ++c) {
    const Real* go = gy.channel(c);
    Real* gi = gx.channel(c);
    for (int z = 0; z < gy.d; ++z) {
      for (int yy = 0; yy < gy.h; ++yy) {
        const Real* src = go + (static_cast<std::size_t>(z) * gy.h + yy) * gy.w;
        Real* dst = gi + (static_cast<std::size_t>(z / 2) * H + yy / 2) * W;
        for (int xx = 0; xx < gy.w; ++xx) dst[xx / 2] += src[xx];
      }
    }
  }
}

template <typename Real>
void silu_forward(const Tensor<Real>& x, Tensor<Real>& y) {
  y.resize(x.c, x.d, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const Real s = Real(1) / (Real(1) + std::exp(-x.v[i]));
    y.v[i] = x.v[i] * s;
  }
}

// gx = gy * silu'(x), where x is the pre-activation input
template <typename Real>
void silu_backward(const Tensor<Real>& x, const Tensor<Real>& gy, Tensor<Real>& gx) {
  gx.resize(x.c, x.d, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const Real s = Real(1) / (Real(1) + std::exp(-x.v[i]));
    gx.v[i] = gy.v[i] * s * (Real(1) + x.v[i] * (Real(1) - s));
  }
}

// Standard transformer-style sinusoidal embedding of an integer timestep.
template <typename Real>
std::vector<Real> sinusoidal_embedding(int t, int dim) {
  std::vector<Real> pe(static_cast<std::size_t>(dim));
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
    pe[2 * i] = static_cast<Real>(std::sin(t * freq));
    pe[2 * i + 1] = static_cast<Real>(std::cos(t * freq));
  }
  return pe;
}

template <typename Real>
struct AdamOpt {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Real> m, v;
  long t = 0;

  void init(std::size_t n) {
    m.assign(n, Real(0));
    v.assign(n, Real(0));
    t = 0;
  }

  void step(std::vector<Real>& params, const std::vector<Real>& grads, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m[i] = static_cast<Real>(beta1 * m[i] + (1.0 - beta1) * g);
      v[i] = static_cast<Real>(beta2 * v[i] + (1.0 - beta2) * g * g);
      params[i] -= static_cast<Real>(lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps));
    }
  }
};

}  // namespace gf::nn
