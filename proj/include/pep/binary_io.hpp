#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pep/error.hpp"

namespace pep::binio {

// Little-endian primitives shared by the PEPS / PEPV / PEPC containers.

inline void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

template <typename U>
void put_le(std::ostream& out, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(buf, sizeof(U));
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
inline void put_f64(std::ostream& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void put_f64s(std::ostream& out, std::span<const double> values) {
  for (double v : values) put_f64(out, v);
}

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    require(in_.gcount() == static_cast<std::streamsize>(magic.size()) && got == magic,
            ErrorKind::Format, what_ + ": bad magic, expected " + std::string(magic));
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(raw<1>()); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw<4>()); }
  std::uint64_t u64() { return raw<8>(); }
  double f64() { return std::bit_cast<double>(raw<8>()); }

  void f64s(std::span<double> out) {
    for (double& v : out) v = f64();
  }

  // Length read from the stream; guards against absurd allocations when the
  // file is truncated or corrupt.
  std::uint64_t length(std::uint64_t limit) {
    const std::uint64_t n = u64();
    require(n <= limit, ErrorKind::Format, what_ + ": implausible array length " + std::to_string(n));
    return n;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  const std::string& what() const { return what_; }

 private:
  template <std::size_t Bytes>
  std::uint64_t raw() {
    unsigned char buf[Bytes];
    in_.read(reinterpret_cast<char*>(buf), Bytes);
    require(in_.gcount() == static_cast<std::streamsize>(Bytes), ErrorKind::Format,
            what_ + ": unexpected end of file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < Bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::string what_;
};

}  // namespace pep::binio
