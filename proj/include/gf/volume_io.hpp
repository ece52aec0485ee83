#pragma once

#include <stdexcept>
#include <string>

#include "gf/volume.hpp"

// File formats.
//
// Native "GVOL v1", little-endian:
//   magic 'GVOL' | u32 version=1 | u32 dtype (0=f32, 1=i32)
//   | 3x u32 dims | 3x f64 spacing mm | 3x f64 origin mm | raw payload.
//
// NIfTI-1 single-file import is read-only and only honors diagonal affines;
// anything oblique is rejected.

namespace gf {

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class malformed_header_error : public io_error {
 public:
  using io_error::io_error;
};

class truncated_payload_error : public io_error {
 public:
  using io_error::io_error;
};

class dimension_overflow_error : public io_error {
 public:
  using io_error::io_error;
};

class nonfinite_payload_error : public io_error {
 public:
  using io_error::io_error;
};

class unsupported_format_error : public io_error {
 public:
  using io_error::io_error;
};

void write_volume(const Volume& v, const std::string& path);
void write_volume(const LabelVolume& v, const std::string& path);

Volume read_volume(const std::string& path);
LabelVolume read_label_volume(const std::string& path);

// Peeks at the dtype field; true if the file stores i32 labels.
bool gvol_is_label_file(const std::string& path);

Volume read_nifti_volume(const std::string& path);
LabelVolume read_nifti_labels(const std::string& path);

}  // namespace gf
