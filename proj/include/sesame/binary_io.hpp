#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sesame/error.hpp"

namespace sesame::io {

// Little-endian primitives used by every binary file format.

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu);
  }
  out.write(bytes, sizeof(UInt));
}

inline void write_f32(std::ostream& out, float value) { write_le(out, std::bit_cast<std::uint32_t>(value)); }

inline void write_i16(std::ostream& out, std::int16_t value) {
  write_le(out, std::bit_cast<std::uint16_t>(value));
}

template <typename UInt>
UInt read_le(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw FormatError("truncated file while reading " + what);
  }
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<UInt>(value);
}

inline float read_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline std::int16_t read_i16(std::istream& in, const std::string& what) {
  return std::bit_cast<std::int16_t>(read_le<std::uint16_t>(in, what));
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& file_kind) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(file_kind + ": bad magic bytes, expected \"" + std::string(magic, 4) + "\"");
  }
}

}  // namespace sesame::io
