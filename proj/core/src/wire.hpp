#ifndef ADVPC_WIRE_HPP
#define ADVPC_WIRE_HPP

// Internal little-endian stream primitives shared by the binary file
// formats. Reads throw TruncatedFileError as soon as the stream runs dry.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "advpc/errors.hpp"

namespace advpc::wire {

inline void put_bytes(std::ostream& os, const unsigned char* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF)};
  put_bytes(os, b, 2);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  put_bytes(os, b, 8);
}

inline void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void get_bytes(std::istream& is, unsigned char* p, std::size_t n,
                      const std::string& path) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw TruncatedFileError(path + ": unexpected end of file");
}

inline std::uint16_t get_u16(std::istream& is, const std::string& path) {
  unsigned char b[2];
  get_bytes(is, b, 2, path);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  get_bytes(is, b, 4, path);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  get_bytes(is, b, 8, path);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline float get_f32(std::istream& is, const std::string& path) {
  return std::bit_cast<float>(get_u32(is, path));
}

inline double get_f64(std::istream& is, const std::string& path) {
  return std::bit_cast<double>(get_u64(is, path));
}

// Big-endian u32, for the IDX import only.
inline std::uint32_t get_u32_be(std::istream& is, const std::string& path) {
  unsigned char b[4];
  get_bytes(is, b, 4, path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | b[i];
  return v;
}

}  // namespace advpc::wire

#endif  // ADVPC_WIRE_HPP
