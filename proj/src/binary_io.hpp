#ifndef TEXTSPOT_BINARY_IO_HPP
#define TEXTSPOT_BINARY_IO_HPP

// Little-endian stream helpers with a running CRC-32.

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "textspot/error.hpp"

namespace textspot::detail {

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "' for writing");
    crc_ = crc32(0L, Z_NULL, 0);
  }

  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    while (size > 0) {
      const std::size_t chunk = std::min<std::size_t>(size, 1u << 30);
      crc_ = crc32(crc_, p, static_cast<uInt>(chunk));
      out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(chunk));
      p += chunk;
      size -= chunk;
    }
    if (!out_) throw Error(ErrorCode::kIoFailure, "write to '" + path_ + "' failed");
  }

  template <typename T>
  void scalar(T value) {
    static_assert(std::is_arithmetic_v<T>);
    value = byteswap_if_big(value);
    bytes(&value, sizeof(T));
  }

  template <typename T>
  void array(const std::vector<T>& values) {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size() * sizeof(T));
    } else {
      for (T v : values) scalar(v);
    }
  }

  void string(const std::string& s) {
    scalar(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

  void finish() {
    const std::uint32_t c = byteswap_if_big(crc());
    out_.write(reinterpret_cast<const char*>(&c), sizeof(c));
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIoFailure, "write to '" + path_ + "' failed");
  }

 private:
  std::ofstream out_;
  std::string path_;
  uLong crc_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::kIoFailure, "cannot open '" + path + "'");
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0, std::ios::beg);
    crc_ = crc32(0L, Z_NULL, 0);
  }

  std::uint64_t remaining() const { return size_ - consumed_; }

  void bytes(void* data, std::size_t size) {
    if (size > remaining()) corrupt("file is truncated");
    auto* p = static_cast<unsigned char*>(data);
    std::size_t left = size;
    while (left > 0) {
      const std::size_t chunk = std::min<std::size_t>(left, 1u << 30);
      in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(chunk));
      if (!in_) corrupt("file is truncated");
      crc_ = crc32(crc_, p, static_cast<uInt>(chunk));
      p += chunk;
      left -= chunk;
    }
    consumed_ += size;
  }

  template <typename T>
  T scalar() {
    static_assert(std::is_arithmetic_v<T>);
    T value{};
    bytes(&value, sizeof(T));
    return byteswap_if_big(value);
  }

  template <typename T>
  std::vector<T> array(std::uint64_t count) {
    static_assert(std::is_arithmetic_v<T>);
    if (count > remaining() / sizeof(T)) corrupt("array length exceeds file size");
    std::vector<T> values(static_cast<std::size_t>(count));
    bytes(values.data(), values.size() * sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : values) v = byteswap_if_big(v);
    }
    return values;
  }

  std::string string() {
    const auto len = scalar<std::uint32_t>();
    if (len > remaining()) corrupt("string length exceeds file size");
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }

  std::uint32_t crc() const { return static_cast<std::uint32_t>(crc_); }

  /// Reads the trailing checksum and requires end of file.
  void verify_trailer() {
    const std::uint32_t expected = crc();
    if (remaining() != sizeof(std::uint32_t)) corrupt("unexpected trailing length");
    const auto stored = scalar<std::uint32_t>();
    if (stored != expected) corrupt("checksum mismatch");
  }

  [[noreturn]] void corrupt(const std::string& why) const {
    throw Error(ErrorCode::kCorruptIndex, "'" + path_ + "': " + why);
  }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint64_t size_ = 0;
  std::uint64_t consumed_ = 0;
  uLong crc_;
};

}  // namespace textspot::detail

#endif  // TEXTSPOT_BINARY_IO_HPP
