#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

// Little-endian binary encode/decode helpers shared by the GVOL/GINR/GWDM
// writers and readers.

namespace gf::bin {

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const unsigned char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

// Sequential reader with bounds checking; throws the supplied exception type.
template <class Error>
class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
  T take() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error(what_ + ": truncated");
    T v = get_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }

  void expect_magic(const char magic[4]) {
    if (pos_ + 4 > bytes_.size() || std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
      throw Error(what_ + ": bad magic");
    }
    pos_ += 4;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const unsigned char* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(what_ + ": truncated");
    pos_ += n;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file_bytes(const std::string& path);   // throws io_error
void write_file_bytes(const std::string& path, const std::string& bytes);

}  // namespace gf::bin
