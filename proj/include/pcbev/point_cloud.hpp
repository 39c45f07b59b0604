#pragma once

// LiDAR scan ingestion: SemanticKITTI-style .bin/.label files and a
// deterministic synthetic scan generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pcbev {

struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Points plus optional per-point semantic labels. All coordinates are finite.
struct PointCloud {
  std::vector<Point> points;
  std::optional<std::vector<std::uint16_t>> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Bytes per record: 4 floats (SemanticKITTI) or 5 floats (nuScenes, 5th ignored).
enum class ScanStride : std::size_t { kFourFloats = 16, kFiveFloats = 20 };

struct ScanReadResult {
  PointCloud cloud;
  std::size_t dropped_non_finite = 0;
};

ScanReadResult decode_scan(std::span<const unsigned char> bytes,
                           ScanStride stride = ScanStride::kFourFloats);
std::vector<unsigned char> encode_scan(const PointCloud& cloud,
                                       ScanStride stride = ScanStride::kFourFloats);

/// Throws FormatError when the size is not a multiple of the stride,
/// IoError when the file cannot be read.
ScanReadResult read_scan(const std::filesystem::path& path,
                         ScanStride stride = ScanStride::kFourFloats);
void write_scan(const std::filesystem::path& path, const PointCloud& cloud,
                ScanStride stride = ScanStride::kFourFloats);

/// Attaches the lower 16 bits of each uint32 record as the semantic label.
/// The file must hold exactly one record per point.
PointCloud read_labels(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud decode_labels(std::span<const unsigned char> bytes, const PointCloud& cloud);

enum class SynthProfile { kUniformDisk, kRing, kRadialFalloff };

std::optional<SynthProfile> parse_synth_profile(std::string_view name);
std::string_view to_string(SynthProfile profile);

inline constexpr double kSynthDiskRadius = 50.0;

/// Deterministic for fixed arguments on every platform (only mt19937_64 bits
/// are consumed, no std:: distributions).
PointCloud synth_scan(std::uint64_t seed, std::size_t n_points,
                      SynthProfile profile = SynthProfile::kUniformDisk);

}  // namespace pcbev
