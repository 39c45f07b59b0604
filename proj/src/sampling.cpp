#include "pcbev/point_interaction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcbev/errors.hpp"
#include "pcbev/parallel.hpp"

namespace pcbev {

std::size_t ContinuousSampleCoords::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

ContinuousSampleCoords sample_coords(const PointCloud& cloud, const GridSpec& grid, int threads) {
  validate_grid(grid);
  ContinuousSampleCoords coords;
  coords.height = grid_rows(grid);
  coords.width = grid_cols(grid);
  coords.row.assign(cloud.size(), 0.0);
  coords.col.assign(cloud.size(), 0.0);
  coords.valid.assign(cloud.size(), 0);
  const double max_row = static_cast<double>(coords.height - 1);
  const double max_col = static_cast<double>(coords.width - 1);
  parallel_for(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double x = cloud.points[i].x;
      const double y = cloud.points[i].y;
      if (!grid_contains(grid, x, y)) continue;
      const GridCoord c = std::visit([&](const auto& g) { return g.continuous(x, y); }, grid);
      coords.row[i] = std::clamp(c.row, 0.0, max_row);
      coords.col[i] = std::clamp(c.col, 0.0, max_col);
      coords.valid[i] = 1;
    }
  });
  return coords;
}

void grid_sample_into(const FeatureMap& map, const ContinuousSampleCoords& coords, PointMatrix& out,
                      int threads) {
  if (map.height() != coords.height || map.width() != coords.width) {
    throw ConfigError("grid_sample: coords were computed for a different grid");
  }
  if (out.rows() != coords.size() || out.dim() != map.channels()) {
    throw ConfigError("grid_sample: output buffer has the wrong shape");
  }
  const std::size_t channels = map.channels();
  const std::size_t w = map.width();
  const std::size_t last_row = map.height() - 1;
  const std::size_t last_col = w - 1;
  parallel_for(coords.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      float* dst = out.row(i).data();
      if (!coords.valid[i]) {
        std::fill(dst, dst + channels, 0.0f);
        continue;
      }
      const double r = coords.row[i];
      const double c = coords.col[i];
      const auto r0 = static_cast<std::size_t>(r);
      const auto c0 = static_cast<std::size_t>(c);
      const std::size_t r1 = std::min(r0 + 1, last_row);
      const std::size_t c1 = std::min(c0 + 1, last_col);
      const double fr = r - static_cast<double>(r0);
      const double fc = c - static_cast<double>(c0);
      const auto w00 = static_cast<float>((1.0 - fr) * (1.0 - fc));
      const auto w01 = static_cast<float>((1.0 - fr) * fc);
      const auto w10 = static_cast<float>(fr * (1.0 - fc));
      const auto w11 = static_cast<float>(fr * fc);
      const float* s00 = map.cell(r0 * w + c0).data();
      const float* s01 = map.cell(r0 * w + c1).data();
      const float* s10 = map.cell(r1 * w + c0).data();
      const float* s11 = map.cell(r1 * w + c1).data();
      for (std::size_t ch = 0; ch < channels; ++ch) {
        dst[ch] = w00 * s00[ch] + w01 * s01[ch] + w10 * s10[ch] + w11 * s11[ch];
      }
    }
  });
}

PointMatrix grid_sample(const FeatureMap& map, const ContinuousSampleCoords& coords, int threads) {
  PointMatrix out(coords.size(), map.channels());
  grid_sample_into(map, coords, out, threads);
  return out;
}

InteractionPlan plan_point_interaction(const GridSpec& src_grid, const GridSpec& dest_grid,
                                       const PointCloud& cloud, int threads) {
  const auto all_coords = sample_coords(cloud, src_grid, threads);
  InteractionPlan plan;
  plan.dest_assignment = assign_cells(cloud, dest_grid, threads);
  auto& dest = plan.dest_assignment;
  auto& src = plan.src_coords;
  src.height = all_coords.height;
  src.width = all_coords.width;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!all_coords.valid[i]) dest.valid[i] = 0;
    if (!dest.valid[i]) continue;
    src.row.push_back(all_coords.row[i]);
    src.col.push_back(all_coords.col[i]);
    src.valid.push_back(1);
  }
  return plan;
}

FeatureMap point_based_interaction(const FeatureMap& f_src, const GridSpec& src_grid,
                                   const GridSpec& dest_grid, const PointCloud& cloud,
                                   Reduce reduce, int threads) {
  const auto plan = plan_point_interaction(src_grid, dest_grid, cloud, threads);
  const auto sampled = grid_sample(f_src, plan.src_coords, threads);
  return scatter_back(sampled, plan.dest_assignment, grid_rows(dest_grid), grid_cols(dest_grid),
                      reduce, threads);
}

PointMatrix point_based_output_fusion(const FeatureMap& f_cart, const CartesianGridSpec& cart_grid,
                                      const FeatureMap& f_polar, const PolarGridSpec& polar_grid,
                                      const PointCloud& cloud, int threads) {
  if (f_cart.channels() != f_polar.channels()) {
    throw ConfigError("output fusion: branch channel counts differ");
  }
  const auto cart = grid_sample(f_cart, sample_coords(cloud, cart_grid, threads), threads);
  const auto polar = grid_sample(f_polar, sample_coords(cloud, polar_grid, threads), threads);
  const std::size_t c = f_cart.channels();
  PointMatrix out(cloud.size(), 2 * c);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto dst = out.row(i);
    std::copy(cart.row(i).begin(), cart.row(i).end(), dst.begin());
    std::copy(polar.row(i).begin(), polar.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(c));
  }
  return out;
}

}  // namespace pcbev
