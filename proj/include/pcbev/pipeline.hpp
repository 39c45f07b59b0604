#pragma once

// End-to-end dual-branch forward pass:
//   encode (Cartesian + Polar) -> k interaction stages (remap + fuse, both
//   directions) -> per-branch backbone -> single-pass output fusion ->
//   per-point classifier.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcbev/backbone.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/point_cloud.hpp"
#include "pcbev/projection.hpp"
#include "pcbev/remap.hpp"

namespace pcbev {

inline constexpr const char* kPipelineSchema = "pipeline_v1";

struct PipelineConfig {
  CartesianGridSpec cartesian;
  PolarGridSpec polar;
  RemapMode remap_mode = RemapMode::kBilinear;
  std::size_t stages = 2;
  int threads = 1;
  std::uint64_t seed = 1234;
  std::vector<std::size_t> encoder_dims{8, 32, 64};
  BackboneConfig backbone;
  std::size_t classes = 20;
  std::size_t classifier_hidden = 64;
  std::optional<std::filesystem::path> encoder_weights;
  std::optional<std::filesystem::path> backbone_weights;
  std::optional<std::filesystem::path> fusion_weights;
  std::optional<std::filesystem::path> classifier_weights;

  /// Grids valid, channel counts consistent, referenced weight files exist.
  void validate() const;
  std::size_t channels() const { return encoder_dims.empty() ? 0 : encoder_dims.back(); }

  /// Relative weight paths resolve against `base_dir`. Missing keys keep
  /// their defaults; unknown schema is a FormatError.
  static PipelineConfig from_json_text(const std::string& text,
                                       const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_json_text() const;
};

struct PipelineWeights {
  PillarEncoderWeights cart_encoder;
  PillarEncoderWeights polar_encoder;
  std::vector<FusionWeights> cart_fusion;   // one per stage, [F_hat_cart; F_cart] -> C
  std::vector<FusionWeights> polar_fusion;  // one per stage, [F_hat_polar; F_polar] -> C
  BranchBackbone cart_backbone;
  BranchBackbone polar_backbone;
  ClassifierWeights classifier;

  /// Seeds every group from cfg.seed, then replaces groups whose weight
  /// file is configured with the loaded tensors.
  static PipelineWeights build(const PipelineConfig& cfg);

  /// Writes the four groups as separate bundles: <dir>/{encoder,backbone,
  /// fusion,classifier}.json (+ .bin).
  void save(const std::filesystem::path& dir) const;
};

struct PipelineResult {
  std::vector<std::uint16_t> labels;
  PointMatrix scores;
  CoverageStats cart_coverage;
  CoverageStats polar_coverage;
  std::uint64_t checksum = 0;
};

/// ConfigError messages name the failing stage.
PipelineResult run_pipeline(const PointCloud& cloud, const PipelineConfig& cfg,
                            const PipelineWeights& weights);

/// Packed little-endian uint16, one per point.
void write_labels_u16(const std::filesystem::path& path, const std::vector<std::uint16_t>& labels);
std::vector<std::uint16_t> read_labels_u16(const std::filesystem::path& path);

}  // namespace pcbev
