#include "pcbev/feature_map.hpp"

#include <algorithm>
#include <string>

#include "binary_io.hpp"
#include "pcbev/checksum.hpp"
#include "pcbev/errors.hpp"

namespace pcbev {

namespace {
constexpr std::size_t kHeaderBytes = 16;
}

std::vector<unsigned char> encode_feature_map(const FeatureMap& map) {
  detail::Bytes out;
  out.reserve(kHeaderBytes + 4 * map.data().size());
  detail::put_magic(out, "BFM1");
  detail::put_u32(out, static_cast<std::uint32_t>(map.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(map.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(map.channels()));
  for (float v : map.data()) detail::put_f32(out, v);
  return out;
}

FeatureMap decode_feature_map(std::span<const unsigned char> bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(bytes.begin(), bytes.begin() + 4, "BFM1")) {
    throw FormatError("not a BFM1 feature map");
  }
  const std::size_t h = detail::get_u32(bytes, 4);
  const std::size_t w = detail::get_u32(bytes, 8);
  const std::size_t c = detail::get_u32(bytes, 12);
  const std::size_t count = h * w * c;
  if (bytes.size() != kHeaderBytes + 4 * count) {
    throw FormatError("BFM1 payload is " + std::to_string(bytes.size() - kHeaderBytes) +
                      " bytes, header declares " + std::to_string(4 * count));
  }
  FeatureMap map(h, w, c);
  auto data = map.data();
  for (std::size_t i = 0; i < count; ++i) data[i] = detail::get_f32(bytes, kHeaderBytes + 4 * i);
  return map;
}

void write_feature_map(const std::filesystem::path& path, const FeatureMap& map) {
  detail::write_file(path, encode_feature_map(map));
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_feature_map(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ConfigError("concat_channels: spatial dims differ");
  }
  FeatureMap out(a.height(), a.width(), a.channels() + b.channels());
  for (std::size_t cell = 0; cell < a.cells(); ++cell) {
    auto dst = out.cell(cell);
    auto left = a.cell(cell);
    auto right = b.cell(cell);
    std::copy(left.begin(), left.end(), dst.begin());
    std::copy(right.begin(), right.end(), dst.begin() + static_cast<std::ptrdiff_t>(left.size()));
  }
  return out;
}

std::uint64_t checksum(const FeatureMap& map) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(map.height()),
                                 static_cast<std::uint32_t>(map.width()),
                                 static_cast<std::uint32_t>(map.channels())};
  h = fnv1a64_bytes({reinterpret_cast<const unsigned char*>(dims), sizeof dims}, h);
  return fnv1a64(map.data(), h);
}

}  // namespace pcbev
