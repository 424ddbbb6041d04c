#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "monofusion/common/error.hpp"

namespace mf::binary {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

/// Append-only little-endian byte buffer.
class Writer {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_array(const T* values, std::size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(values);
    bytes_.insert(bytes_.end(), p, p + sizeof(T) * count);
  }

  void put_raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

  [[nodiscard]] const std::vector<char>& bytes() const noexcept { return bytes_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot open for writing: " + path);
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + path);
  }

 private:
  std::vector<char> bytes_;
};

/// Bounds-checked reader; running past the end raises FormatError.
class Reader {
 public:
  explicit Reader(std::vector<char> bytes, std::string origin = "<memory>")
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), path);
  }

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T value;
    ensure(sizeof(T));
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
  void get_array(T* out, std::size_t count) {
    ensure(sizeof(T) * count);
    std::memcpy(out, bytes_.data() + pos_, sizeof(T) * count);
    pos_ += sizeof(T) * count;
  }

  void get_raw(char* out, std::size_t n) {
    ensure(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  [[nodiscard]] const std::string& origin() const noexcept { return origin_; }

 private:
  void ensure(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorCode::FormatError, "truncated data in " + origin_);
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::string origin_;
};

}  // namespace mf::binary
