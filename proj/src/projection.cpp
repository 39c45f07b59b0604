#include "pcbev/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "pcbev/errors.hpp"
#include "pcbev/parallel.hpp"
#include "pcbev/rng.hpp"
#include "pcbev/weights_io.hpp"

namespace pcbev {

std::size_t CellAssignment::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

CellAssignment assign_cells(const PointCloud& cloud, const GridSpec& grid, int threads) {
  validate_grid(grid);
  CellAssignment a;
  a.height = grid_rows(grid);
  a.width = grid_cols(grid);
  a.row.assign(cloud.size(), 0);
  a.col.assign(cloud.size(), 0);
  a.valid.assign(cloud.size(), 0);
  parallel_for(cloud.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Point& p = cloud.points[i];
      if (auto cell = grid_locate(grid, p.x, p.y)) {
        a.row[i] = cell->row;
        a.col[i] = cell->col;
        a.valid[i] = 1;
      }
    }
  });
  return a;
}

PointMatrix point_input_features(const PointCloud& cloud, const CellAssignment& assignment,
                                 const GridSpec& grid) {
  if (assignment.size() != cloud.size()) {
    throw ConfigError("point_input_features: assignment does not match the cloud");
  }
  const auto* polar = std::get_if<PolarGridSpec>(&grid);
  PointMatrix out(assignment.valid_count(), kPointFeatureDim);
  std::size_t j = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!assignment.valid[i]) continue;
    const Point& p = cloud.points[i];
    const double x = p.x;
    const double y = p.y;
    const Vec2 center = grid_cell_center(grid, static_cast<std::size_t>(assignment.row[i]),
                                         static_cast<std::size_t>(assignment.col[i]));
    const double phi = polar ? polar->azimuth_of(x, y) : std::atan2(y, x);
    auto f = out.row(j++);
    f[0] = p.x;
    f[1] = p.y;
    f[2] = p.z;
    f[3] = p.intensity;
    f[4] = static_cast<float>(std::sqrt(x * x + y * y));
    f[5] = static_cast<float>(phi);
    f[6] = static_cast<float>(x - center.x);
    f[7] = static_cast<float>(y - center.y);
  }
  return out;
}

void PillarEncoderWeights::validate() const {
  if (layers.empty()) throw ConfigError("pillar encoder has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].validate("pillar encoder");
    if (k > 0 && layers[k].in != layers[k - 1].out) {
      throw ConfigError("pillar encoder layer " + std::to_string(k) + " expects " +
                        std::to_string(layers[k].in) + " inputs but layer " +
                        std::to_string(k - 1) + " produces " + std::to_string(layers[k - 1].out));
    }
  }
}

PillarEncoderWeights PillarEncoderWeights::seeded(std::uint64_t seed,
                                                  const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ConfigError("pillar encoder needs at least input and output dims");
  Rng rng(seed);
  PillarEncoderWeights w;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    w.layers.push_back(Affine::seeded(dims[k], dims[k + 1], rng));
  }
  return w;
}

void PillarEncoderWeights::to_bundle(TensorBundle& bundle, const std::string& prefix) const {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    bundle.put_affine(prefix + "layer" + std::to_string(k), layers[k]);
  }
}

PillarEncoderWeights PillarEncoderWeights::from_bundle(const TensorBundle& bundle,
                                                       const std::string& prefix) {
  PillarEncoderWeights w;
  for (std::size_t k = 0; bundle.contains(prefix + "layer" + std::to_string(k) + ".weight"); ++k) {
    w.layers.push_back(bundle.get_affine(prefix + "layer" + std::to_string(k)));
  }
  w.validate();
  return w;
}

void PillarEncoderWeights::save(const std::filesystem::path& manifest) const {
  TensorBundle bundle("pillar_encoder");
  to_bundle(bundle, "");
  bundle.save(manifest);
}

PillarEncoderWeights PillarEncoderWeights::load(const std::filesystem::path& manifest) {
  return from_bundle(TensorBundle::load(manifest), "");
}

PointMatrix pillar_encode(const PointMatrix& features, const PillarEncoderWeights& weights,
                          int threads) {
  weights.validate();
  if (features.dim() != weights.input_dim()) {
    throw ConfigError("pillar encoder expects " + std::to_string(weights.input_dim()) +
                      "-dim features, got " + std::to_string(features.dim()));
  }
  std::size_t widest = 0;
  for (const auto& l : weights.layers) widest = std::max(widest, l.out);
  PointMatrix out(features.rows(), weights.output_dim());
  parallel_for(features.rows(), threads, [&](std::size_t begin, std::size_t end) {
    // a and b swap roles per layer, so both must fit the input row too
    std::vector<float> a(std::max(widest, features.dim()));
    std::vector<float> b(a.size());
    for (std::size_t i = begin; i < end; ++i) {
      auto x = features.row(i);
      std::copy(x.begin(), x.end(), a.begin());
      for (const Affine& layer : weights.layers) {
        layer.apply({a.data(), layer.in}, {b.data(), layer.out});
        relu_inplace({b.data(), layer.out});
        std::swap(a, b);
      }
      auto y = out.row(i);
      std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(y.size()), y.begin());
    }
  });
  return out;
}

std::string_view to_string(Reduce reduce) { return reduce == Reduce::kMax ? "max" : "mean"; }

namespace {

void scatter_serial(const PointMatrix& values, const CellAssignment& assignment, Reduce reduce,
                    FeatureMap& out) {
  const std::size_t channels = values.dim();
  std::vector<std::uint32_t> counts(out.cells(), 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (!assignment.valid[i]) continue;
    const std::size_t cell = assignment.flat(i);
    const float* v = values.row(j++).data();
    float* dst = out.cell(cell).data();
    if (reduce == Reduce::kMax && counts[cell] != 0) {
      for (std::size_t c = 0; c < channels; ++c) dst[c] = std::max(dst[c], v[c]);
    } else if (reduce == Reduce::kMax) {
      for (std::size_t c = 0; c < channels; ++c) dst[c] = v[c];
    } else {
      for (std::size_t c = 0; c < channels; ++c) dst[c] += v[c];
    }
    ++counts[cell];
  }
  if (reduce == Reduce::kMean) {
    for (std::size_t cell = 0; cell < counts.size(); ++cell) {
      if (counts[cell] < 2) continue;
      const float inv = 1.0f / static_cast<float>(counts[cell]);
      for (float& v : out.cell(cell)) v *= inv;
    }
  }
}

void scatter_atomic(const PointMatrix& values, const CellAssignment& assignment, Reduce reduce,
                    FeatureMap& out, int threads) {
  const std::size_t channels = values.dim();
  std::vector<std::uint32_t> counts(out.cells(), 0);
  std::fill(out.data().begin(), out.data().end(),
            reduce == Reduce::kMax ? -std::numeric_limits<float>::infinity() : 0.0f);
  // Row offsets of each valid point in `values`.
  std::vector<std::size_t> value_row(assignment.size(), 0);
  for (std::size_t i = 0, j = 0; i < assignment.size(); ++i) {
    if (assignment.valid[i]) value_row[i] = j++;
  }
  parallel_for(assignment.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!assignment.valid[i]) continue;
      const std::size_t cell = assignment.flat(i);
      const float* v = values.row(value_row[i]).data();
      float* dst = out.cell(cell).data();
      for (std::size_t c = 0; c < channels; ++c) {
        std::atomic_ref<float> slot(dst[c]);
        if (reduce == Reduce::kMax) {
          float seen = slot.load(std::memory_order_relaxed);
          while (v[c] > seen && !slot.compare_exchange_weak(seen, v[c], std::memory_order_relaxed)) {
          }
        } else {
          slot.fetch_add(v[c], std::memory_order_relaxed);
        }
      }
      std::atomic_ref<std::uint32_t>(counts[cell]).fetch_add(1, std::memory_order_relaxed);
    }
  });
  for (std::size_t cell = 0; cell < counts.size(); ++cell) {
    if (counts[cell] == 0) {
      for (float& v : out.cell(cell)) v = 0.0f;
    } else if (reduce == Reduce::kMean && counts[cell] > 1) {
      const float inv = 1.0f / static_cast<float>(counts[cell]);
      for (float& v : out.cell(cell)) v *= inv;
    }
  }
}

}  // namespace

void scatter_reduce_into(const PointMatrix& values, const CellAssignment& assignment,
                         Reduce reduce, FeatureMap& out, int threads) {
  if (values.rows() != assignment.valid_count()) {
    throw ConfigError("scatter: " + std::to_string(values.rows()) + " value rows for " +
                      std::to_string(assignment.valid_count()) + " valid points");
  }
  if (out.height() != assignment.height || out.width() != assignment.width ||
      out.channels() != values.dim()) {
    throw ConfigError("scatter: output map shape does not match assignment and values");
  }
  if (threads > 1) {
    scatter_atomic(values, assignment, reduce, out, threads);
  } else {
    std::fill(out.data().begin(), out.data().end(), 0.0f);
    scatter_serial(values, assignment, reduce, out);
  }
}

FeatureMap scatter_reduce(const PointMatrix& values, const CellAssignment& assignment,
                          std::size_t height, std::size_t width, Reduce reduce, int threads) {
  if (assignment.height != height || assignment.width != width) {
    throw ConfigError("scatter: assignment was computed for a different grid");
  }
  FeatureMap out(height, width, values.dim());
  scatter_reduce_into(values, assignment, reduce, out, threads);
  return out;
}

FeatureMap project_to_bev(const PointCloud& cloud, const GridSpec& grid,
                          const PillarEncoderWeights& weights, int threads) {
  const auto assignment = assign_cells(cloud, grid, threads);
  const auto features = point_input_features(cloud, assignment, grid);
  const auto encoded = pillar_encode(features, weights, threads);
  return scatter_max(encoded, assignment, assignment.height, assignment.width, threads);
}

}  // namespace pcbev
