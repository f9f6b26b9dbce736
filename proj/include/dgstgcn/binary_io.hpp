#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "dgstgcn/error.hpp"

namespace dgstgcn {

// Little-endian byte streams for the SKL1 / DGW1 / SCR1 formats.

class ByteWriter {
public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put(bits, 4);
  }
  void bytes(std::string_view s) { out_.append(s); }

  const std::string &str() const { return out_; }
  std::string take() { return std::move(out_); }

private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class ByteReader {
public:
  ByteReader(std::string_view data, std::string format) : data_(data), format_(std::move(format)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
  float f32() {
    const auto bits = static_cast<std::uint32_t>(get(4, "f32"));
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string_view bytes(std::size_t n, const char *what) {
    need(n, what);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic(std::string_view magic) {
    if (remaining() < magic.size() || data_.substr(0, magic.size()) != magic)
      fail("bad magic: expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string &msg) const { throw FormatError(format_ + ": " + msg, pos_); }
  void need(std::size_t n, const char *what) const {
    if (remaining() < n)
      fail(std::string("truncated file while reading ") + what + " (need " + std::to_string(n) + " bytes, " +
           std::to_string(remaining()) + " left)");
  }

private:
  std::uint64_t get(int n, const char *what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::string format_;
  std::size_t pos_ = 0;
};

} // namespace dgstgcn
