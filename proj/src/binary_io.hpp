#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "physworld/error.hpp"

// Little-endian binary container helpers shared by the PW* file formats.
namespace physworld::io {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  }
  void magic(const std::array<char, 4>& m) { out_.write(m.data(), 4); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* data, std::size_t n) { raw(data, n); }
  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "write failed: " + path_.string());
  }

 private:
  void raw(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  }
  void expect_magic(const std::array<char, 4>& m) {
    std::array<char, 4> got{};
    raw(got.data(), 4);
    if (got != m) {
      throw Error(ErrorCode::kFormat,
                  path_.string() + ": bad magic, expected " + std::string(m.data(), 4));
    }
  }
  std::uint32_t u32() { return value<std::uint32_t>(); }
  std::uint64_t u64() { return value<std::uint64_t>(); }
  float f32() { return value<float>(); }
  double f64() { return value<double>(); }
  void bytes(void* data, std::size_t n) { raw(data, n); }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw Error(ErrorCode::kFormat, path_.string() + ": trailing bytes");
    }
  }

 private:
  template <typename T>
  T value() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  void raw(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw Error(ErrorCode::kFormat, path_.string() + ": truncated");
    }
  }
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace physworld::io
