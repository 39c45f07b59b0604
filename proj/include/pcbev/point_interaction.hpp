#pragma once

// Point-based cross-view interaction: bilinear grid sampling of a map at
// per-point locations followed by a scatter back into another grid. This is
// the reference the remap engine is checked and timed against.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcbev/feature_map.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/linalg.hpp"
#include "pcbev/point_cloud.hpp"
#include "pcbev/projection.hpp"

namespace pcbev {

/// Per-point continuous (row, col) in a grid's index space. Valid entries
/// are already clamped to [0, H-1] x [0, W-1].
struct ContinuousSampleCoords {
  std::vector<double> row;
  std::vector<double> col;
  std::vector<std::uint8_t> valid;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return valid.size(); }
  std::size_t valid_count() const;
};

/// A point is valid when it lies inside the grid bounds (same rule as
/// assign_cells); its index coordinates are then clamped to the cell-center
/// lattice.
ContinuousSampleCoords sample_coords(const PointCloud& cloud, const GridSpec& grid,
                                     int threads = 1);

/// Bilinear read over the four enclosing cells; invalid points read zeros.
/// Output has one row per entry of `coords`.
PointMatrix grid_sample(const FeatureMap& map, const ContinuousSampleCoords& coords,
                        int threads = 1);
void grid_sample_into(const FeatureMap& map, const ContinuousSampleCoords& coords,
                      PointMatrix& out, int threads = 1);

inline FeatureMap scatter_back(const PointMatrix& values, const CellAssignment& assignment,
                               std::size_t height, std::size_t width, Reduce reduce = Reduce::kMax,
                               int threads = 1) {
  return scatter_reduce(values, assignment, height, width, reduce, threads);
}

/// Points usable as a bridge: valid in both the source sampling coords and
/// the destination assignment. Returns the compacted source coords and a
/// destination assignment whose valid flags are restricted accordingly.
struct InteractionPlan {
  ContinuousSampleCoords src_coords;
  CellAssignment dest_assignment;
};

InteractionPlan plan_point_interaction(const GridSpec& src_grid, const GridSpec& dest_grid,
                                       const PointCloud& cloud, int threads = 1);

/// grid_sample in src, then scatter_back into dest. Cells without bridge
/// points stay exactly 0.
FeatureMap point_based_interaction(const FeatureMap& f_src, const GridSpec& src_grid,
                                   const GridSpec& dest_grid, const PointCloud& cloud,
                                   Reduce reduce = Reduce::kMax, int threads = 1);

/// Concat(GS(f_cart), GS(f_polar)) per point: two independent sampling passes.
PointMatrix point_based_output_fusion(const FeatureMap& f_cart, const CartesianGridSpec& cart_grid,
                                      const FeatureMap& f_polar, const PolarGridSpec& polar_grid,
                                      const PointCloud& cloud, int threads = 1);

}  // namespace pcbev
