#ifndef SEQRL_SRC_BINARY_IO_HPP_
#define SEQRL_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqrl/common.hpp"

namespace seqrl::detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void magic(std::string_view tag) { out_.write(tag.data(), tag.size()); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(std::span<const double> values) {
    raw(values.data(), values.size_bytes());
  }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("failed writing: " + path_);
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open: " + path);
  }

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    raw(got.data(), got.size());
    if (got != tag) throw IoError("bad checkpoint magic in " + path_);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  void f64s(std::span<double> out) { raw(out.data(), out.size_bytes()); }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw IoError("trailing bytes in checkpoint " + path_);
    }
  }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw IoError("truncated checkpoint " + path_);
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace seqrl::detail

#endif  // SEQRL_SRC_BINARY_IO_HPP_
