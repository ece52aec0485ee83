#include "gf/volume_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "gf/binio.hpp"

namespace gf {

namespace {

constexpr std::uint32_t kGvolVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;
constexpr std::uint32_t kDtypeI32 = 1;
// Caps nx*ny*nz; guards payload size arithmetic on 32-bit size_t as well.
constexpr std::uint64_t kMaxVoxels = 1ull << 31;

using bin::get_le;
using bin::put_le;

struct GvolHeader {
  std::uint32_t dtype = 0;
  Index3 dims{};
  Vec3 spacing{};
  Vec3 origin{};
};

constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 3 * 4 + 6 * 8;

std::string encode_header(std::uint32_t dtype, const Index3& dims, const Vec3& spacing, const Vec3& origin) {
  std::string out;
  out.reserve(kHeaderSize);
  out.append("GVOL", 4);
  put_le<std::uint32_t>(out, kGvolVersion);
  put_le<std::uint32_t>(out, dtype);
  for (int a = 0; a < 3; ++a) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims[a]));
  for (int a = 0; a < 3; ++a) put_le<double>(out, spacing[a]);
  for (int a = 0; a < 3; ++a) put_le<double>(out, origin[a]);
  return out;
}

GvolHeader decode_header(const std::vector<unsigned char>& bytes, const std::string& path) {
  if (bytes.size() < kHeaderSize) throw malformed_header_error(path + ": file shorter than GVOL header");
  if (std::memcmp(bytes.data(), "GVOL", 4) != 0) throw malformed_header_error(path + ": bad magic");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kGvolVersion) {
    throw malformed_header_error(path + ": unsupported GVOL version " + std::to_string(version));
  }
  GvolHeader h;
  h.dtype = get_le<std::uint32_t>(bytes.data() + 8);
  if (h.dtype != kDtypeF32 && h.dtype != kDtypeI32) {
    throw malformed_header_error(path + ": unknown dtype " + std::to_string(h.dtype));
  }
  std::uint64_t count = 1;
  for (int a = 0; a < 3; ++a) {
    const auto d = get_le<std::uint32_t>(bytes.data() + 12 + 4 * a);
    if (d == 0) throw malformed_header_error(path + ": zero dimension");
    count *= d;
    if (count > kMaxVoxels) throw dimension_overflow_error(path + ": dims exceed voxel limit");
    h.dims[a] = static_cast<int>(d);
  }
  for (int a = 0; a < 3; ++a) {
    h.spacing[a] = get_le<double>(bytes.data() + 24 + 8 * a);
    h.origin[a] = get_le<double>(bytes.data() + 48 + 8 * a);
    if (!(h.spacing[a] > 0.0) || !std::isfinite(h.spacing[a]) || !std::isfinite(h.origin[a])) {
      throw malformed_header_error(path + ": non-positive or non-finite spacing/origin");
    }
  }
  return h;
}

void check_payload(const std::vector<unsigned char>& bytes, std::size_t count, const std::string& path) {
  if (bytes.size() < kHeaderSize + count * 4) {
    throw truncated_payload_error(path + ": payload shorter than nx*ny*nz elements");
  }
}

void write_bytes(const std::string& path, const std::string& header, const void* payload, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace

void write_volume(const Volume& v, const std::string& path) {
  if (v.data.size() != v.voxel_count()) throw invariant_error("write_volume: data length mismatch");
  const std::string header = encode_header(kDtypeF32, v.dims, v.spacing, v.origin);
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(path, header, v.data.data(), v.data.size() * 4);
  } else {
    std::string payload;
    payload.reserve(v.data.size() * 4);
    for (float x : v.data) put_le<float>(payload, x);
    write_bytes(path, header, payload.data(), payload.size());
  }
}

void write_volume(const LabelVolume& v, const std::string& path) {
  if (v.labels.size() != v.voxel_count()) throw invariant_error("write_volume: label length mismatch");
  const std::string header = encode_header(kDtypeI32, v.dims, v.spacing, v.origin);
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(path, header, v.labels.data(), v.labels.size() * 4);
  } else {
    std::string payload;
    payload.reserve(v.labels.size() * 4);
    for (std::int32_t x : v.labels) put_le<std::int32_t>(payload, x);
    write_bytes(path, header, payload.data(), payload.size());
  }
}

Volume read_volume(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  const GvolHeader h = decode_header(bytes, path);
  if (h.dtype != kDtypeF32) throw unsupported_format_error(path + ": expected f32 volume, found i32 labels");
  Volume v(h.dims, h.spacing, h.origin);
  check_payload(bytes, v.voxel_count(), path);
  const unsigned char* p = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = get_le<float>(p + 4 * i);
  for (float x : v.data) {
    if (!std::isfinite(x)) throw nonfinite_payload_error(path + ": payload contains NaN/Inf");
  }
  return v;
}

LabelVolume read_label_volume(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  const GvolHeader h = decode_header(bytes, path);
  if (h.dtype != kDtypeI32) throw unsupported_format_error(path + ": expected i32 labels, found f32 volume");
  LabelVolume v(h.dims, h.spacing, h.origin);
  check_payload(bytes, v.voxel_count(), path);
  const unsigned char* p = bytes.data() + kHeaderSize;
  for (std::size_t i = 0; i < v.labels.size(); ++i) v.labels[i] = get_le<std::int32_t>(p + 4 * i);
  for (std::int32_t l : v.labels) {
    if (l < 0 || l >= kLabelCount) throw malformed_header_error(path + ": label value outside {0..4}");
  }
  return v;
}

bool gvol_is_label_file(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  return decode_header(bytes, path).dtype == kDtypeI32;
}

// ---------------------------------------------------------------------------
// NIfTI-1 import

namespace {

struct NiftiGrid {
  Index3 dims;
  Vec3 spacing;
  Vec3 origin;
  std::int16_t datatype;
  float scl_slope, scl_inter;
  std::size_t data_offset;
};

NiftiGrid parse_nifti_header(const std::vector<unsigned char>& b, const std::string& path) {
  if (b.size() < 348) throw malformed_header_error(path + ": NIfTI header shorter than 348 bytes");
  if (std::memcmp(b.data() + 344, "n+1\0", 4) != 0) {
    throw unsupported_format_error(path + ": not a single-file NIfTI-1 (magic != n+1)");
  }
  const auto dim0 = get_le<std::int16_t>(b.data() + 40);
  if (dim0 < 3 || dim0 > 4) throw unsupported_format_error(path + ": only 3D NIfTI volumes are supported");
  NiftiGrid g{};
  for (int a = 0; a < 3; ++a) {
    const auto d = get_le<std::int16_t>(b.data() + 42 + 2 * a);
    if (d <= 0) throw malformed_header_error(path + ": non-positive NIfTI dimension");
    g.dims[a] = d;
  }
  if (dim0 == 4 && get_le<std::int16_t>(b.data() + 48) != 1) {
    throw unsupported_format_error(path + ": 4D NIfTI with more than one frame");
  }
  g.datatype = get_le<std::int16_t>(b.data() + 70);
  g.scl_slope = get_le<float>(b.data() + 112);
  g.scl_inter = get_le<float>(b.data() + 116);
  const float vox_offset = get_le<float>(b.data() + 108);
  g.data_offset = static_cast<std::size_t>(vox_offset);
  if (g.data_offset < 348) throw malformed_header_error(path + ": vox_offset before end of header");

  const auto sform_code = get_le<std::int16_t>(b.data() + 254);
  if (sform_code > 0) {
    float srow[3][4];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) srow[r][c] = get_le<float>(b.data() + 280 + 16 * r + 4 * c);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (r != c && std::abs(srow[r][c]) > 1e-5f * (std::abs(srow[r][r]) + 1e-20f)) {
          throw unsupported_format_error(path + ": oblique NIfTI affine; only diagonal scaling is supported");
        }
      }
    }
    for (int a = 0; a < 3; ++a) {
      g.spacing[a] = std::abs(srow[a][a]);
      g.origin[a] = srow[a][3];
      if (!(g.spacing[a] > 0.0)) throw malformed_header_error(path + ": zero scaling in NIfTI affine");
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      const float pd = get_le<float>(b.data() + 76 + 4 * (a + 1));
      g.spacing[a] = pd > 0.0f ? pd : 1.0;
      g.origin[a] = 0.0;
    }
  }
  return g;
}

template <class T>
double fetch_as_double(const unsigned char* p, std::size_t i) {
  return static_cast<double>(get_le<T>(p + sizeof(T) * i));
}

}  // namespace

Volume read_nifti_volume(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  const NiftiGrid g = parse_nifti_header(bytes, path);
  Volume v(g.dims, g.spacing, g.origin);

  std::size_t elem = 0;
  double (*fetch)(const unsigned char*, std::size_t) = nullptr;
  switch (g.datatype) {
    case 2: elem = 1; fetch = fetch_as_double<std::uint8_t>; break;
    case 4: elem = 2; fetch = fetch_as_double<std::int16_t>; break;
    case 8: elem = 4; fetch = fetch_as_double<std::int32_t>; break;
    case 16: elem = 4; fetch = fetch_as_double<float>; break;
    case 64: elem = 8; fetch = fetch_as_double<double>; break;
    case 512: elem = 2; fetch = fetch_as_double<std::uint16_t>; break;
    default:
      throw unsupported_format_error(path + ": unsupported NIfTI datatype " + std::to_string(g.datatype));
  }
  const std::size_t n = v.voxel_count();
  if (bytes.size() < g.data_offset + n * elem) throw truncated_payload_error(path + ": NIfTI payload truncated");
  const unsigned char* p = bytes.data() + g.data_offset;
  const double slope = (g.scl_slope == 0.0f) ? 1.0 : g.scl_slope;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = fetch(p, i) * slope + g.scl_inter;
    if (!std::isfinite(raw)) throw nonfinite_payload_error(path + ": NIfTI payload contains NaN/Inf");
    v.data[i] = static_cast<float>(raw);
  }
  return v;
}

LabelVolume read_nifti_labels(const std::string& path) {
  const Volume v = read_nifti_volume(path);
  LabelVolume out(v.dims, v.spacing, v.origin);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    const long l = std::lround(static_cast<double>(v.data[i]));
    if (l < 0 || l >= kLabelCount) {
      throw malformed_header_error(path + ": NIfTI label value outside {0..4}");
    }
    out.labels[i] = static_cast<std::int32_t>(l);
  }
  return out;
}

}  // namespace gf
