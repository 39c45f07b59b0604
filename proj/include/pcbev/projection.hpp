#pragma once

// Point -> BEV cell assignment, per-point decoration, the pillar encoder
// (stack of affine + ReLU with batch-norm folded in) and scatter reduction
// of per-point vectors into dense feature maps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "pcbev/feature_map.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/linalg.hpp"
#include "pcbev/point_cloud.hpp"

namespace pcbev {

class TensorBundle;

struct CellAssignment {
  std::vector<std::int32_t> row;
  std::vector<std::int32_t> col;
  std::vector<std::uint8_t> valid;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return valid.size(); }
  std::size_t valid_count() const;
  std::size_t flat(std::size_t i) const {
    return static_cast<std::size_t>(row[i]) * width + static_cast<std::size_t>(col[i]);
  }
};

/// Out-of-bounds points are flagged invalid, never clamped.
CellAssignment assign_cells(const PointCloud& cloud, const GridSpec& grid, int threads = 1);

inline constexpr std::size_t kPointFeatureDim = 8;

/// (x, y, z, intensity, rho, phi, x - cell_center_x, y - cell_center_y)
/// for each valid point, in cloud order. Invalid points are skipped.
PointMatrix point_input_features(const PointCloud& cloud, const CellAssignment& assignment,
                                 const GridSpec& grid);

struct PillarEncoderWeights {
  std::vector<Affine> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  /// Throws ConfigError if layers are empty or do not chain.
  void validate() const;

  /// dims = {D_in, hidden..., C}; default 8 -> 32 -> 64.
  static PillarEncoderWeights seeded(std::uint64_t seed,
                                     const std::vector<std::size_t>& dims = {8, 32, 64});

  void to_bundle(TensorBundle& bundle, const std::string& prefix) const;
  static PillarEncoderWeights from_bundle(const TensorBundle& bundle, const std::string& prefix);
  void save(const std::filesystem::path& manifest) const;
  static PillarEncoderWeights load(const std::filesystem::path& manifest);
};

/// ReLU(A_k(...ReLU(A_1 x + b_1)...) + b_k), row by row.
PointMatrix pillar_encode(const PointMatrix& features, const PillarEncoderWeights& weights,
                          int threads = 1);

enum class Reduce { kMax, kMean };

std::string_view to_string(Reduce reduce);

/// Reduces one row of `values` per valid point of `assignment` into an
/// H x W x C map. Empty cells are 0. threads > 1 uses per-cell-channel
/// atomics; max is exact for any thread count, mean may differ in the last
/// bits from the single-threaded reference.
FeatureMap scatter_reduce(const PointMatrix& values, const CellAssignment& assignment,
                          std::size_t height, std::size_t width, Reduce reduce, int threads = 1);
/// Same, writing into a preallocated map of the right shape.
void scatter_reduce_into(const PointMatrix& values, const CellAssignment& assignment,
                         Reduce reduce, FeatureMap& out, int threads = 1);

inline FeatureMap scatter_max(const PointMatrix& encoded, const CellAssignment& assignment,
                              std::size_t height, std::size_t width, int threads = 1) {
  return scatter_reduce(encoded, assignment, height, width, Reduce::kMax, threads);
}

/// assign_cells + point_input_features + pillar_encode + scatter_max.
FeatureMap project_to_bev(const PointCloud& cloud, const GridSpec& grid,
                          const PillarEncoderWeights& weights, int threads = 1);

}  // namespace pcbev
