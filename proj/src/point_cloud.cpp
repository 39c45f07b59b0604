#include "pcbev/point_cloud.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/rng.hpp"

namespace pcbev {

ScanReadResult decode_scan(std::span<const unsigned char> bytes, ScanStride stride) {
  const auto step = static_cast<std::size_t>(stride);
  if (bytes.size() % step != 0) {
    throw FormatError("scan size " + std::to_string(bytes.size()) + " is not a multiple of " +
                      std::to_string(step));
  }
  ScanReadResult result;
  const std::size_t count = bytes.size() / step;
  result.cloud.points.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t base = k * step;
    Point p{detail::get_f32(bytes, base), detail::get_f32(bytes, base + 4),
            detail::get_f32(bytes, base + 8), detail::get_f32(bytes, base + 12)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.intensity)) {
      ++result.dropped_non_finite;
      continue;
    }
    result.cloud.points.push_back(p);
  }
  return result;
}

std::vector<unsigned char> encode_scan(const PointCloud& cloud, ScanStride stride) {
  detail::Bytes out;
  out.reserve(cloud.size() * static_cast<std::size_t>(stride));
  for (const Point& p : cloud.points) {
    detail::put_f32(out, p.x);
    detail::put_f32(out, p.y);
    detail::put_f32(out, p.z);
    detail::put_f32(out, p.intensity);
    if (stride == ScanStride::kFiveFloats) detail::put_f32(out, 0.0f);
  }
  return out;
}

ScanReadResult read_scan(const std::filesystem::path& path, ScanStride stride) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_scan(bytes, stride);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_scan(const std::filesystem::path& path, const PointCloud& cloud, ScanStride stride) {
  detail::write_file(path, encode_scan(cloud, stride));
}

PointCloud decode_labels(std::span<const unsigned char> bytes, const PointCloud& cloud) {
  if (bytes.size() != 4 * cloud.size()) {
    throw FormatError("label file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(4 * cloud.size()));
  }
  PointCloud out = cloud;
  std::vector<std::uint16_t> labels(cloud.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    labels[k] = static_cast<std::uint16_t>(detail::get_u32(bytes, 4 * k) & 0xffffu);
  }
  out.labels = std::move(labels);
  return out;
}

PointCloud read_labels(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_labels(bytes, cloud);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::optional<SynthProfile> parse_synth_profile(std::string_view name) {
  if (name == "uniform-disk") return SynthProfile::kUniformDisk;
  if (name == "ring") return SynthProfile::kRing;
  if (name == "radial-falloff") return SynthProfile::kRadialFalloff;
  return std::nullopt;
}

std::string_view to_string(SynthProfile profile) {
  switch (profile) {
    case SynthProfile::kUniformDisk: return "uniform-disk";
    case SynthProfile::kRing: return "ring";
    case SynthProfile::kRadialFalloff: return "radial-falloff";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point uniform_disk_point(Rng& rng) {
  // Rejection from the bounding square keeps the float coordinates inside
  // the disk exactly, not just up to rounding of r*cos(theta).
  const double r2 = kSynthDiskRadius * kSynthDiskRadius;
  for (;;) {
    const auto x = static_cast<float>(rng.uniform(-kSynthDiskRadius, kSynthDiskRadius));
    const auto y = static_cast<float>(rng.uniform(-kSynthDiskRadius, kSynthDiskRadius));
    const double dx = x;
    const double dy = y;
    if (dx * dx + dy * dy <= r2) {
      const auto z = static_cast<float>(rng.uniform(-3.0, 1.0));
      const auto intensity = static_cast<float>(rng.uniform());
      return {x, y, z, intensity};
    }
  }
}

// 32 beams hitting flat ground at increasing range, as a spinning sensor
// mounted 1.7 m up would see them.
Point ring_point(Rng& rng) {
  constexpr int kBeams = 32;
  const int beam = static_cast<int>(rng.bits() % kBeams);
  const double radius = 3.0 * std::pow(kSynthDiskRadius / 3.0, beam / double(kBeams - 1));
  const double rho = radius * (1.0 + rng.uniform(-0.01, 0.01));
  const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const auto x = static_cast<float>(rho * std::cos(phi));
  const auto y = static_cast<float>(rho * std::sin(phi));
  const auto z = static_cast<float>(-1.7 + rng.uniform(-0.05, 0.05));
  const auto intensity = static_cast<float>(rng.uniform());
  return {x, y, z, intensity};
}

Point radial_falloff_point(Rng& rng) {
  const double u = rng.uniform();
  const double rho = 2.0 + (kSynthDiskRadius - 2.0) * u * u;
  const double phi = rng.uniform(0.0, kTwoPi);
  const auto x = static_cast<float>(rho * std::cos(phi));
  const auto y = static_cast<float>(rho * std::sin(phi));
  const auto z = static_cast<float>(rng.uniform(-3.0, 1.0));
  const auto intensity = static_cast<float>(rng.uniform());
  return {x, y, z, intensity};
}

}  // namespace

PointCloud synth_scan(std::uint64_t seed, std::size_t n_points, SynthProfile profile) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    switch (profile) {
      case SynthProfile::kUniformDisk: cloud.points.push_back(uniform_disk_point(rng)); break;
      case SynthProfile::kRing: cloud.points.push_back(ring_point(rng)); break;
      case SynthProfile::kRadialFalloff: cloud.points.push_back(radial_falloff_point(rng)); break;
    }
  }
  return cloud;
}

}  // namespace pcbev
