#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gf/volume.hpp"

// Level-1 3D Haar DWT, orthonormal normalization (1/sqrt(2) per axis pass),
// so energy is preserved and white noise stays white across the transform.
//
// Subband indexing: band = 4*hx + 2*hy + hz, where h* = 1 selects the
// high-pass filter along that axis. Names read in (x,y,z) order:
// LLL=0, LLH=1, LHL=2, LHH=3, HLL=4, HLH=5, HHL=6, HHH=7.
//
// Multi-channel data is channel-major; within a channel, x-fastest.

namespace gf {

class wavelet_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum Subband { LLL = 0, LLH = 1, LHL = 2, LHH = 3, HLL = 4, HLH = 5, HHL = 6, HHH = 7 };
inline constexpr int kSubbands = 8;

const char* subband_name(int band);

template <typename T>
struct WaveletCoeffs {
  Index3 source_dims{0, 0, 0};
  int channels = 0;
  // bands[c*8 + band], each of size (nx/2)*(ny/2)*(nz/2), x-fastest.
  std::vector<std::vector<T>> bands;

  Index3 band_dims() const {
    return {source_dims[0] / 2, source_dims[1] / 2, source_dims[2] / 2};
  }
  std::size_t band_size() const {
    const Index3 b = band_dims();
    return static_cast<std::size_t>(b[0]) * b[1] * b[2];
  }
  const std::vector<T>& band(int channel, int sub) const { return bands[channel * kSubbands + sub]; }
  std::vector<T>& band(int channel, int sub) { return bands[channel * kSubbands + sub]; }
};

namespace wdetail {

template <typename T>
void haar_axis_forward(std::vector<T>& data, const Index3& dims, int axis) {
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const int n = dims[axis];
  const int half = n / 2;
  const std::size_t stride[3] = {1, static_cast<std::size_t>(dims[0]),
                                 static_cast<std::size_t>(dims[0]) * dims[1]};
  const int oa = (axis + 1) % 3, ob = (axis + 2) % 3;
  std::vector<T> line(static_cast<std::size_t>(n));
  for (int b = 0; b < dims[ob]; ++b) {
    for (int a = 0; a < dims[oa]; ++a) {
      const std::size_t base = static_cast<std::size_t>(a) * stride[oa] + static_cast<std::size_t>(b) * stride[ob];
      T* p = data.data() + base;
      const std::size_t s = stride[axis];
      for (int i = 0; i < half; ++i) {
        const T lo = p[2 * i * s], hi = p[(2 * i + 1) * s];
        line[i] = (lo + hi) * inv_sqrt2;
        line[half + i] = (lo - hi) * inv_sqrt2;
      }
      for (int i = 0; i < n; ++i) p[i * s] = line[i];
    }
  }
}

template <typename T>
void haar_axis_inverse(std::vector<T>& data, const Index3& dims, int axis) {
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const int n = dims[axis];
  const int half = n / 2;
  const std::size_t stride[3] = {1, static_cast<std::size_t>(dims[0]),
                                 static_cast<std::size_t>(dims[0]) * dims[1]};
  const int oa = (axis + 1) % 3, ob = (axis + 2) % 3;
  std::vector<T> line(static_cast<std::size_t>(n));
  for (int b = 0; b < dims[ob]; ++b) {
    for (int a = 0; a < dims[oa]; ++a) {
      const std::size_t base = static_cast<std::size_t>(a) * stride[oa] + static_cast<std::size_t>(b) * stride[ob];
      T* p = data.data() + base;
      const std::size_t s = stride[axis];
      for (int i = 0; i < half; ++i) {
        const T lo = p[i * s], hi = p[(half + i) * s];
        line[2 * i] = (lo + hi) * inv_sqrt2;
        line[2 * i + 1] = (lo - hi) * inv_sqrt2;
      }
      for (int i = 0; i < n; ++i) p[i * s] = line[i];
    }
  }
}

}  // namespace wdetail

// Forward transform of channel-major data (channels * nx*ny*nz values).
template <typename T>
WaveletCoeffs<T> dwt3(const std::vector<T>& data, const Index3& dims, int channels) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0 || dims[a] % 2 != 0) {
      throw wavelet_error("dwt3: dims must be positive and even, got " + std::to_string(dims[a]) + " on axis " +
                          std::to_string(a));
    }
  }
  const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (channels <= 0 || data.size() != plane * channels) {
    throw wavelet_error("dwt3: data length does not match dims*channels");
  }

  WaveletCoeffs<T> out;
  out.source_dims = dims;
  out.channels = channels;
  out.bands.assign(static_cast<std::size_t>(channels) * kSubbands, {});
  const Index3 bd = out.band_dims();
  const std::size_t bsize = out.band_size();

  std::vector<T> work(plane);
  for (int c = 0; c < channels; ++c) {
    std::copy(data.begin() + c * plane, data.begin() + (c + 1) * plane, work.begin());
    wdetail::haar_axis_forward(work, dims, 0);
    wdetail::haar_axis_forward(work, dims, 1);
    wdetail::haar_axis_forward(work, dims, 2);
    // After the three passes each (low/high) half along each axis holds one
    // subband; scatter the 8 blocks out.
    for (int sub = 0; sub < kSubbands; ++sub) {
      const int hx = (sub >> 2) & 1, hy = (sub >> 1) & 1, hz = sub & 1;
      auto& bandv = out.bands[static_cast<std::size_t>(c) * kSubbands + sub];
      bandv.resize(bsize);
      std::size_t n = 0;
      for (int k = 0; k < bd[2]; ++k) {
        for (int j = 0; j < bd[1]; ++j) {
          const std::size_t row = static_cast<std::size_t>(hx) * bd[0] +
                                  static_cast<std::size_t>(dims[0]) * ((j + static_cast<std::size_t>(hy) * bd[1]) +
                                                                       static_cast<std::size_t>(dims[1]) *
                                                                           (k + static_cast<std::size_t>(hz) * bd[2]));
          for (int i = 0; i < bd[0]; ++i, ++n) bandv[n] = work[row + i];
        }
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> idwt3(const WaveletCoeffs<T>& c) {
  const Index3 dims = c.source_dims;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0 || dims[a] % 2 != 0) throw wavelet_error("idwt3: invalid source dims");
  }
  if (c.channels <= 0 || c.bands.size() != static_cast<std::size_t>(c.channels) * kSubbands) {
    throw wavelet_error("idwt3: band count does not match channel count");
  }
  const Index3 bd = c.band_dims();
  const std::size_t bsize = c.band_size();
  for (const auto& b : c.bands) {
    if (b.size() != bsize) throw wavelet_error("idwt3: inconsistent subband shape");
  }

  const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<T> out(plane * c.channels);
  std::vector<T> work(plane);
  for (int ch = 0; ch < c.channels; ++ch) {
    for (int sub = 0; sub < kSubbands; ++sub) {
      const int hx = (sub >> 2) & 1, hy = (sub >> 1) & 1, hz = sub & 1;
      const auto& bandv = c.bands[static_cast<std::size_t>(ch) * kSubbands + sub];
      std::size_t n = 0;
      for (int k = 0; k < bd[2]; ++k) {
        for (int j = 0; j < bd[1]; ++j) {
          const std::size_t row = static_cast<std::size_t>(hx) * bd[0] +
                                  static_cast<std::size_t>(dims[0]) * ((j + static_cast<std::size_t>(hy) * bd[1]) +
                                                                       static_cast<std::size_t>(dims[1]) *
                                                                           (k + static_cast<std::size_t>(hz) * bd[2]));
          for (int i = 0; i < bd[0]; ++i, ++n) work[row + i] = bandv[n];
        }
      }
    }
    wdetail::haar_axis_inverse(work, dims, 2);
    wdetail::haar_axis_inverse(work, dims, 1);
    wdetail::haar_axis_inverse(work, dims, 0);
    std::copy(work.begin(), work.end(), out.begin() + ch * plane);
  }
  return out;
}

// Packs coefficients into one contiguous tensor of channels*8 half-resolution
// "coefficient channels" (the diffusion model's state layout).
template <typename T>
std::vector<T> pack_coeffs(const WaveletCoeffs<T>& c) {
  std::vector<T> out;
  out.reserve(c.bands.size() * c.band_size());
  for (const auto& b : c.bands) out.insert(out.end(), b.begin(), b.end());
  return out;
}

template <typename T>
WaveletCoeffs<T> unpack_coeffs(const std::vector<T>& packed, const Index3& source_dims, int channels) {
  WaveletCoeffs<T> c;
  c.source_dims = source_dims;
  c.channels = channels;
  const std::size_t bsize = c.band_size();
  if (packed.size() != bsize * channels * kSubbands) throw wavelet_error("unpack_coeffs: size mismatch");
  c.bands.resize(static_cast<std::size_t>(channels) * kSubbands);
  for (std::size_t b = 0; b < c.bands.size(); ++b) {
    c.bands[b].assign(packed.begin() + b * bsize, packed.begin() + (b + 1) * bsize);
  }
  return c;
}

}  // namespace gf
