#pragma once

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <string>

#include "gf/phantom.hpp"
#include "gf/rng.hpp"
#include "gf/volume.hpp"

// Shared fixtures for the test suites.

namespace gft {

// Unique scratch directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("grooveforge_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline gf::Volume random_volume(const gf::Index3& dims, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  gf::Volume v(dims, {1, 1, 1}, {0, 0, 0});
  gf::Rng rng(seed);
  for (auto& x : v.data) x = static_cast<float>(lo + (hi - lo) * rng.uniform());
  return v;
}

inline gf::LabelVolume random_labels(const gf::Index3& dims, std::uint64_t seed) {
  gf::LabelVolume v(dims, {1, 1, 1}, {0, 0, 0});
  gf::Rng rng(seed);
  for (auto& l : v.labels) l = static_cast<std::int32_t>(rng.below(gf::kLabelCount));
  return v;
}

// Small default phantom used across suites.
inline gf::PhantomVolumes default_phantom(int dims = 64, double spacing = 1.0, double w = 10.0, double d = 5.0,
                                          std::uint64_t seed = 1) {
  gf::TrochleaPhantomSpec spec;
  spec.condyle_half_width = w;
  spec.groove_depth = d;
  spec.seed = seed;
  return gf::generate_phantom(spec, {dims, dims, dims}, {spacing, spacing, spacing});
}

}  // namespace gft
