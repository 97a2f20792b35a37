#pragma once

// Shared envelope for the binary formats:
//   magic[4] | u32 version | u32 rows | u32 cols | payload | u64 FNV-1a(payload)
// All integers and floats little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "gvvad/errors.hpp"
#include "gvvad/rng.hpp"

namespace gvvad::detail {

inline constexpr std::uint32_t envelope_version = 1;
inline constexpr std::size_t envelope_header_size = 16;
inline constexpr std::size_t envelope_trailer_size = 8;

template <typename UInt>
void put_le(std::vector<char>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

template <typename UInt>
UInt get_le(const char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    v |= static_cast<UInt>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

inline void put_f32(std::vector<char>& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::vector<char>& out, double f) { put_le(out, std::bit_cast<std::uint64_t>(f)); }
inline float get_f32(const char* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
inline double get_f64(const char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

inline std::uint64_t payload_checksum(const std::vector<char>& payload) {
  return fnv1a64(std::string_view(payload.data(), payload.size()));
}

inline void write_envelope(const std::filesystem::path& path, std::string_view magic,
                           std::uint32_t rows, std::uint32_t cols,
                           const std::vector<char>& payload) {
  std::vector<char> bytes;
  bytes.reserve(envelope_header_size + payload.size() + envelope_trailer_size);
  bytes.insert(bytes.end(), magic.begin(), magic.end());
  put_le(bytes, envelope_version);
  put_le(bytes, rows);
  put_le(bytes, cols);
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  put_le(bytes, payload_checksum(payload));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

struct Envelope {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<char> payload;
};

/// Reads and verifies an envelope. `payload_bytes(rows, cols)` gives the
/// expected payload length for the header's shape.
template <typename SizeFn>
Envelope read_envelope(const std::filesystem::path& path, std::string_view magic,
                       SizeFn payload_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::string where = path.string();
  if (bytes.size() < envelope_header_size + envelope_trailer_size) {
    throw IntegrityError(where + ": truncated header");
  }
  if (std::string_view(bytes.data(), 4) != magic) {
    throw IntegrityError(where + ": bad magic, expected " + std::string(magic));
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != envelope_version) {
    throw IntegrityError(where + ": unsupported version " + std::to_string(version));
  }
  Envelope env;
  env.rows = get_le<std::uint32_t>(bytes.data() + 8);
  env.cols = get_le<std::uint32_t>(bytes.data() + 12);
  const std::uint64_t expected = payload_bytes(std::uint64_t{env.rows}, std::uint64_t{env.cols});
  const std::uint64_t actual = bytes.size() - envelope_header_size - envelope_trailer_size;
  if (actual < expected) throw IntegrityError(where + ": truncated payload");
  if (actual > expected) throw IntegrityError(where + ": trailing bytes after payload");

  env.payload.assign(bytes.begin() + envelope_header_size,
                     bytes.begin() + static_cast<std::ptrdiff_t>(envelope_header_size + expected));
  const auto stored = get_le<std::uint64_t>(bytes.data() + envelope_header_size + expected);
  if (stored != payload_checksum(env.payload)) throw IntegrityError(where + ": checksum mismatch");
  return env;
}

}  // namespace gvvad::detail
