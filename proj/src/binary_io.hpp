#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "geossl/error.hpp"

// Explicit little-endian byte packing shared by the binary file formats.
namespace geossl::detail {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  template <typename T>
  void le(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }

  const std::vector<char>& buffer() const { return buf_; }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), path.string());
  }

  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t count, std::string_view what) const {
    if (remaining() < count) {
      throw TruncatedError(name_ + ": truncated " + std::string(what) + " (need " + std::to_string(count) +
                           " bytes, have " + std::to_string(remaining()) + ")");
    }
  }

  std::string bytes(std::size_t count, std::string_view what) {
    require(count, what);
    std::string out(data_.data() + pos_, count);
    pos_ += count;
    return out;
  }

  template <typename T>
  T le(std::string_view what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    require(sizeof(T), what);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::uint32_t be_u32(std::string_view what) {
    require(4, what);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  const char* cursor() const { return data_.data() + pos_; }
  void skip(std::size_t count) { pos_ += count; }
  const std::string& name() const { return name_; }

 private:
  std::vector<char> data_;
  std::string name_;
  std::size_t pos_ = 0;
};

// Guards n * m against overflow before it is used as a byte count.
inline std::size_t checked_mul(std::uint64_t a, std::uint64_t b, std::string_view what) {
  if (a != 0 && b > SIZE_MAX / a) throw FormatError("size overflow in " + std::string(what));
  return static_cast<std::size_t>(a * b);
}

}  // namespace geossl::detail
