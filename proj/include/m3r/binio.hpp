#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "m3r/common.hpp"

// Little-endian binary readers/writers shared by the GVOL, M3RF, M3RD and
// M3RC file formats.

namespace m3r::binio {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path.string()), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path_);
  }

  void magic(const char (&tag)[5]) { raw(tag, 4); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  void f32_array(std::span<const float> v) {
    for (float x : v) f32(x);
  }
  void f64_array(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void u8_array(std::span<const std::uint8_t> v) {
    raw(v.data(), v.size());
  }
  void bytes(const std::string& s) { raw(s.data(), s.size()); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_);
  }

 private:
  template <typename U>
  void put_le(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
      buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    raw(buf, sizeof(U));
  }
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed: " + path_);
  }

  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path_);
  }

  void expect_magic(const char (&tag)[5]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, tag, 4) != 0)
      throw IoError("bad magic in " + path_ + " (expected " + tag + ")");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

  std::vector<float> f32_array(std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = f32();
    return v;
  }
  std::vector<double> f64_array(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::vector<std::uint8_t> u8_array(std::size_t n) {
    std::vector<std::uint8_t> v(n);
    raw(v.data(), n);
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }
  const std::string& path() const { return path_; }

 private:
  template <typename U>
  U get_le() {
    unsigned char buf[sizeof(U)];
    raw(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return v;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw IoError("truncated file: " + path_);
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace m3r::binio
