#pragma once

// Little-endian packing helpers shared by the scan, map and table readers.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace pcbev::detail {

using Bytes = std::vector<unsigned char>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xffu));
}
inline void put_i32(Bytes& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
inline void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_magic(Bytes& out, std::string_view magic) {
  for (char c : magic) out.push_back(static_cast<unsigned char>(c));
}

inline std::uint32_t get_u32(std::span<const unsigned char> in, std::size_t offset) {
  return static_cast<std::uint32_t>(in[offset]) | (static_cast<std::uint32_t>(in[offset + 1]) << 8) |
         (static_cast<std::uint32_t>(in[offset + 2]) << 16) |
         (static_cast<std::uint32_t>(in[offset + 3]) << 24);
}
inline std::int32_t get_i32(std::span<const unsigned char> in, std::size_t offset) {
  return static_cast<std::int32_t>(get_u32(in, offset));
}
inline float get_f32(std::span<const unsigned char> in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

}  // namespace pcbev::detail
