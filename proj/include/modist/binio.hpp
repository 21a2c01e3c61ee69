#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modist/error.hpp"

namespace modist::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian and written with native byte order");

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FormatError("cannot open for writing: " + path);
  }

  void magic(std::string_view m) {
    if (m.size() != 8) throw FormatError("magic must be 8 bytes");
    out_.write(m.data(), 8);
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void floats(std::span<const float> v) { raw(v.data(), v.size_bytes()); }
  void float_block(std::span<const float> v) {
    u64(v.size());
    floats(v);
  }
  void close() {
    out_.close();
    if (!out_) throw FormatError("write failed");
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw FormatError("write failed");
  }
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open for reading: " + path);
  }

  void expect_magic(std::string_view m) {
    char buf[8];
    raw(buf, 8);
    if (std::string_view(buf, 8) != m) {
      throw FormatError("bad magic in " + path_ + " (expected " + std::string(m) + ")");
    }
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int64_t i64() { return pod<std::int64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw FormatError("implausible string length in " + path_);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void floats(std::span<float> v) { raw(v.data(), v.size_bytes()); }
  std::vector<float> float_block() {
    const auto n = u64();
    if (n > (1ULL << 34)) throw FormatError("implausible block length in " + path_);
    std::vector<float> v(n);
    floats(v);
    return v;
  }
  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("truncated file: " + path_);
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace modist::binio
