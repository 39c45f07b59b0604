#pragma once

// Fixed Polar <-> Cartesian correspondence between the two BEV branches.
// Every destination cell center is transformed once into the other
// partitioning and the resulting source indices (and bilinear weights) are
// stored, so cross-branch alignment at run time is a dense, row-ordered
// gather with no per-point work and no scatter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "pcbev/feature_map.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/linalg.hpp"
#include "pcbev/point_cloud.hpp"
#include "pcbev/projection.hpp"

namespace pcbev {

class TensorBundle;

enum class RemapMode : std::uint8_t { kNearest = 0, kBilinear = 1 };

std::optional<RemapMode> parse_remap_mode(std::string_view name);
std::string_view to_string(RemapMode mode);

inline constexpr std::int32_t kInvalidIndex = -1;

/// Nearest: one source flat index per destination cell (-1 when the cell has
/// no source). Bilinear: four indices and four weights per destination
/// cell; invalid cells carry -1 indices and zero weights.
struct RemapTable {
  RemapMode mode = RemapMode::kNearest;
  std::uint32_t dest_height = 0;
  std::uint32_t dest_width = 0;
  std::uint32_t src_height = 0;
  std::uint32_t src_width = 0;
  std::vector<std::int32_t> index;
  std::vector<float> weight;

  std::size_t dest_cells() const { return std::size_t{dest_height} * dest_width; }
  std::size_t taps() const { return mode == RemapMode::kNearest ? 1 : 4; }
  bool valid(std::size_t dest_cell) const { return index[dest_cell * taps()] != kInvalidIndex; }
  std::size_t valid_count() const;

  friend bool operator==(const RemapTable&, const RemapTable&) = default;
};

/// One of `src`/`dest` must be Cartesian and the other Polar; otherwise
/// ConfigError. Parallel over destination rows; the table does not depend
/// on the thread count.
RemapTable build_remap_table(const GridSpec& src, const GridSpec& dest, RemapMode mode,
                             int threads = 1);

/// Dense gather in destination row-major order. Invalid cells are zero.
FeatureMap apply_remap(const RemapTable& table, const FeatureMap& src, int threads = 1);
void apply_remap_into(const RemapTable& table, const FeatureMap& src, FeatureMap& out,
                      int threads = 1);

/// "RMT1", mode byte, uint32 dest H, dest W, src H, src W, then per
/// destination cell either one int32 (nearest) or 4 int32 + 4 float32.
std::vector<unsigned char> encode_remap_table(const RemapTable& table);
RemapTable decode_remap_table(std::span<const unsigned char> bytes);
void write_remap_table(const std::filesystem::path& path, const RemapTable& table);
RemapTable read_remap_table(const std::filesystem::path& path);

/// Per-cell affine from 2C concatenated channels back to C.
struct FusionWeights {
  Affine affine;

  std::size_t channels() const { return affine.out; }
  void validate() const;
  static FusionWeights seeded(std::size_t channels, std::uint64_t seed);
  static FusionWeights from_blocks(const Affine& left, const Affine& right);
  void to_bundle(TensorBundle& bundle, const std::string& prefix) const;
  static FusionWeights from_bundle(const TensorBundle& bundle, const std::string& prefix);
};

/// out(cell) = W [a(cell); b(cell)] + bias at every cell, occupied or not.
FeatureMap fuse_concat_affine(const FeatureMap& a, const FeatureMap& b,
                              const FusionWeights& weights, int threads = 1);

/// GS(Concat(f_cart, PolarToCart(f_polar))): the polar map is remapped into
/// Cartesian space and a single bilinear sampling pass reads both halves.
/// Points outside the Cartesian grid get zero rows.
PointMatrix fused_output_features(const FeatureMap& f_cart, const FeatureMap& f_polar,
                                  const RemapTable& polar_to_cart,
                                  const CartesianGridSpec& cart_grid, const PointCloud& cloud,
                                  int threads = 1);

struct CoverageStats {
  std::size_t occupied_cells = 0;
  std::size_t total_cells = 0;
  double occupancy_fraction = 0.0;
};

/// Distinct occupied cells over H*W. Sparse (point-based) fusion reaches only
/// these cells; dense remap fusion reaches all H*W.
CoverageStats coverage_stats(const CellAssignment& assignment, std::size_t height,
                             std::size_t width);

}  // namespace pcbev
