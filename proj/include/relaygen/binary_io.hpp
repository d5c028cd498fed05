#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace relaygen {

// Raised when a binary payload is malformed: bad magic, unsupported version,
// truncated body, or a field that fails validation on read.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

static_assert(std::endian::native == std::endian::little,
              "serialization code assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("unexpected end of stream");
  return value;
}

inline void write_u16(std::ostream& out, uint16_t v) { write_raw(out, v); }
inline void write_u32(std::ostream& out, uint32_t v) { write_raw(out, v); }
inline void write_u64(std::ostream& out, uint64_t v) { write_raw(out, v); }
inline void write_f32(std::ostream& out, float v) { write_raw(out, v); }
inline void write_f64(std::ostream& out, double v) { write_raw(out, v); }

inline uint16_t read_u16(std::istream& in) { return read_raw<uint16_t>(in); }
inline uint32_t read_u32(std::istream& in) { return read_raw<uint32_t>(in); }
inline uint64_t read_u64(std::istream& in) { return read_raw<uint64_t>(in); }
inline float read_f32(std::istream& in) { return read_raw<float>(in); }
inline double read_f64(std::istream& in) { return read_raw<double>(in); }

inline void write_magic(std::ostream& out, const char magic[4]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char magic[4], const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0)
    throw FormatError("bad magic for " + what);
}

inline void expect_version(std::istream& in, uint16_t expected, const std::string& what) {
  const uint16_t v = read_u16(in);
  if (v != expected)
    throw FormatError(what + ": unsupported format version " + std::to_string(v));
}

// Length-prefixed UTF-8 string (u32 byte count, then the bytes).
inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, uint32_t max_len = 1u << 20) {
  const uint32_t n = read_u32(in);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " out of range");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw FormatError("unexpected end of stream in string");
  return s;
}

inline void write_f64_array(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) write_f64(out, x);
}

inline std::vector<double> read_f64_array(std::istream& in, size_t n) {
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = read_f64(in);
  return v;
}

}  // namespace io
}  // namespace relaygen
