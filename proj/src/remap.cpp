#include "pcbev/remap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/parallel.hpp"
#include "pcbev/point_interaction.hpp"
#include "pcbev/rng.hpp"
#include "pcbev/weights_io.hpp"

namespace pcbev {

std::optional<RemapMode> parse_remap_mode(std::string_view name) {
  if (name == "nearest") return RemapMode::kNearest;
  if (name == "bilinear") return RemapMode::kBilinear;
  return std::nullopt;
}

std::string_view to_string(RemapMode mode) {
  return mode == RemapMode::kNearest ? "nearest" : "bilinear";
}

std::size_t RemapTable::valid_count() const {
  std::size_t n = 0;
  for (std::size_t d = 0; d < dest_cells(); ++d) n += valid(d) ? 1 : 0;
  return n;
}

namespace {

struct Taps {
  std::int32_t index[4] = {kInvalidIndex, kInvalidIndex, kInvalidIndex, kInvalidIndex};
  float weight[4] = {0.0f, 0.0f, 0.0f, 0.0f};
};

void fill_weights(Taps& t, double fr, double fc) {
  t.weight[0] = static_cast<float>((1.0 - fr) * (1.0 - fc));
  t.weight[1] = static_cast<float>((1.0 - fr) * fc);
  t.weight[2] = static_cast<float>(fr * (1.0 - fc));
  t.weight[3] = static_cast<float>(fr * fc);
}

Taps bilinear_taps(const CartesianGridSpec& src, double x, double y) {
  Taps t;
  if (!src.contains(x, y)) return t;
  const GridCoord c = src.continuous(x, y);
  const double r = std::clamp(c.row, 0.0, static_cast<double>(src.height - 1));
  const double q = std::clamp(c.col, 0.0, static_cast<double>(src.width - 1));
  const auto r0 = static_cast<std::int32_t>(r);
  const auto c0 = static_cast<std::int32_t>(q);
  const std::int32_t r1 = std::min<std::int32_t>(r0 + 1, static_cast<std::int32_t>(src.height) - 1);
  const std::int32_t c1 = std::min<std::int32_t>(c0 + 1, static_cast<std::int32_t>(src.width) - 1);
  const auto w = static_cast<std::int32_t>(src.width);
  t.index[0] = r0 * w + c0;
  t.index[1] = r0 * w + c1;
  t.index[2] = r1 * w + c0;
  t.index[3] = r1 * w + c1;
  fill_weights(t, r - r0, q - c0);
  return t;
}

// Rho is clamped to the first/last ring of centers; phi wraps around the seam.
Taps bilinear_taps(const PolarGridSpec& src, double x, double y) {
  Taps t;
  if (!src.contains(x, y)) return t;
  const GridCoord c = src.continuous(x, y);
  const double r = std::clamp(c.row, 0.0, static_cast<double>(src.n_rho - 1));
  const auto r0 = static_cast<std::int32_t>(r);
  const std::int32_t r1 = std::min<std::int32_t>(r0 + 1, static_cast<std::int32_t>(src.n_rho) - 1);
  const double p0 = std::floor(c.col);
  const auto n_phi = static_cast<std::int32_t>(src.n_phi);
  auto wrap = [n_phi](std::int64_t k) {
    return static_cast<std::int32_t>(((k % n_phi) + n_phi) % n_phi);
  };
  const std::int32_t c0 = wrap(static_cast<std::int64_t>(p0));
  const std::int32_t c1 = wrap(static_cast<std::int64_t>(p0) + 1);
  t.index[0] = r0 * n_phi + c0;
  t.index[1] = r0 * n_phi + c1;
  t.index[2] = r1 * n_phi + c0;
  t.index[3] = r1 * n_phi + c1;
  fill_weights(t, r - r0, c.col - p0);
  return t;
}

template <typename Src>
std::int32_t nearest_index(const Src& src, double x, double y) {
  const auto cell = src.locate(x, y);
  if (!cell) return kInvalidIndex;
  return cell->row * static_cast<std::int32_t>(src.cols()) + cell->col;
}

template <typename Src, typename Dest>
RemapTable build_typed(const Src& src, const Dest& dest, RemapMode mode, int threads) {
  src.validate();
  dest.validate();
  RemapTable table;
  table.mode = mode;
  table.dest_height = static_cast<std::uint32_t>(dest.rows());
  table.dest_width = static_cast<std::uint32_t>(dest.cols());
  table.src_height = static_cast<std::uint32_t>(src.rows());
  table.src_width = static_cast<std::uint32_t>(src.cols());
  const std::size_t taps = table.taps();
  table.index.assign(table.dest_cells() * taps, kInvalidIndex);
  if (mode == RemapMode::kBilinear) table.weight.assign(table.dest_cells() * taps, 0.0f);
  const std::size_t width = dest.cols();
  parallel_for(dest.rows(), threads, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t row = row_begin; row < row_end; ++row) {
      for (std::size_t col = 0; col < width; ++col) {
        const std::size_t d = row * width + col;
        const Vec2 center = dest.cell_center(row, col);
        if (mode == RemapMode::kNearest) {
          table.index[d] = nearest_index(src, center.x, center.y);
          continue;
        }
        const Taps t = bilinear_taps(src, center.x, center.y);
        std::copy(std::begin(t.index), std::end(t.index), table.index.begin() + 4 * d);
        std::copy(std::begin(t.weight), std::end(t.weight), table.weight.begin() + 4 * d);
      }
    }
  });
  return table;
}

}  // namespace

RemapTable build_remap_table(const GridSpec& src, const GridSpec& dest, RemapMode mode,
                             int threads) {
  if (const auto* polar = std::get_if<PolarGridSpec>(&src)) {
    if (const auto* cart = std::get_if<CartesianGridSpec>(&dest)) {
      return build_typed(*polar, *cart, mode, threads);
    }
  } else if (const auto* cart = std::get_if<CartesianGridSpec>(&src)) {
    if (const auto* polar = std::get_if<PolarGridSpec>(&dest)) {
      return build_typed(*cart, *polar, mode, threads);
    }
  }
  throw ConfigError("remap table needs one cartesian and one polar grid, got two " +
                    std::string(grid_family(src)) + " grids");
}

void apply_remap_into(const RemapTable& table, const FeatureMap& src, FeatureMap& out,
                      int threads) {
  if (src.height() != table.src_height || src.width() != table.src_width) {
    throw ConfigError("apply_remap: source map is " + std::to_string(src.height()) + "x" +
                      std::to_string(src.width()) + ", table expects " +
                      std::to_string(table.src_height) + "x" + std::to_string(table.src_width));
  }
  if (out.height() != table.dest_height || out.width() != table.dest_width ||
      out.channels() != src.channels()) {
    throw ConfigError("apply_remap: output map has the wrong shape");
  }
  const std::size_t channels = src.channels();
  const std::size_t width = table.dest_width;
  const float* src_data = src.data().data();
  float* out_data = out.data().data();
  const std::int32_t* index = table.index.data();
  const float* weight = table.weight.data();
  parallel_for(table.dest_height, threads, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t d = row_begin * width; d < row_end * width; ++d) {
      float* dst = out_data + d * channels;
      if (table.mode == RemapMode::kNearest) {
        const std::int32_t i = index[d];
        if (i == kInvalidIndex) {
          std::fill(dst, dst + channels, 0.0f);
        } else {
          const float* s = src_data + static_cast<std::size_t>(i) * channels;
          std::copy(s, s + channels, dst);
        }
        continue;
      }
      const std::int32_t* idx = index + 4 * d;
      if (idx[0] == kInvalidIndex) {
        std::fill(dst, dst + channels, 0.0f);
        continue;
      }
      const float* w = weight + 4 * d;
      const float* s0 = src_data + static_cast<std::size_t>(idx[0]) * channels;
      const float* s1 = src_data + static_cast<std::size_t>(idx[1]) * channels;
      const float* s2 = src_data + static_cast<std::size_t>(idx[2]) * channels;
      const float* s3 = src_data + static_cast<std::size_t>(idx[3]) * channels;
      const float w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3];
      for (std::size_t c = 0; c < channels; ++c) {
        dst[c] = w0 * s0[c] + w1 * s1[c] + w2 * s2[c] + w3 * s3[c];
      }
    }
  });
}

FeatureMap apply_remap(const RemapTable& table, const FeatureMap& src, int threads) {
  FeatureMap out(table.dest_height, table.dest_width, src.channels());
  apply_remap_into(table, src, out, threads);
  return out;
}

namespace {
constexpr std::size_t kTableHeader = 4 + 1 + 16;
}

std::vector<unsigned char> encode_remap_table(const RemapTable& table) {
  detail::Bytes out;
  const std::size_t per_cell = table.mode == RemapMode::kNearest ? 4 : 32;
  out.reserve(kTableHeader + per_cell * table.dest_cells());
  detail::put_magic(out, "RMT1");
  out.push_back(static_cast<unsigned char>(table.mode));
  detail::put_u32(out, table.dest_height);
  detail::put_u32(out, table.dest_width);
  detail::put_u32(out, table.src_height);
  detail::put_u32(out, table.src_width);
  for (std::size_t d = 0; d < table.dest_cells(); ++d) {
    if (table.mode == RemapMode::kNearest) {
      detail::put_i32(out, table.index[d]);
      continue;
    }
    for (int k = 0; k < 4; ++k) detail::put_i32(out, table.index[4 * d + k]);
    for (int k = 0; k < 4; ++k) detail::put_f32(out, table.weight[4 * d + k]);
  }
  return out;
}

RemapTable decode_remap_table(std::span<const unsigned char> bytes) {
  if (bytes.size() < kTableHeader || !std::equal(bytes.begin(), bytes.begin() + 4, "RMT1")) {
    throw FormatError("not an RMT1 remap table");
  }
  RemapTable table;
  if (bytes[4] > 1) throw FormatError("RMT1: unknown mode byte " + std::to_string(bytes[4]));
  table.mode = static_cast<RemapMode>(bytes[4]);
  table.dest_height = detail::get_u32(bytes, 5);
  table.dest_width = detail::get_u32(bytes, 9);
  table.src_height = detail::get_u32(bytes, 13);
  table.src_width = detail::get_u32(bytes, 17);
  const std::size_t per_cell = table.mode == RemapMode::kNearest ? 4 : 32;
  if (bytes.size() != kTableHeader + per_cell * table.dest_cells()) {
    throw FormatError("RMT1: payload size does not match header dims");
  }
  const std::int64_t src_cells = std::int64_t{table.src_height} * table.src_width;
  auto check = [&](std::int32_t i) {
    if (i != kInvalidIndex && (i < 0 || i >= src_cells)) {
      throw FormatError("RMT1: source index " + std::to_string(i) + " out of range");
    }
    return i;
  };
  std::size_t offset = kTableHeader;
  if (table.mode == RemapMode::kNearest) {
    table.index.resize(table.dest_cells());
    for (auto& i : table.index) {
      i = check(detail::get_i32(bytes, offset));
      offset += 4;
    }
    return table;
  }
  table.index.resize(4 * table.dest_cells());
  table.weight.resize(4 * table.dest_cells());
  for (std::size_t d = 0; d < table.dest_cells(); ++d) {
    for (int k = 0; k < 4; ++k, offset += 4) table.index[4 * d + k] = check(detail::get_i32(bytes, offset));
    for (int k = 0; k < 4; ++k, offset += 4) table.weight[4 * d + k] = detail::get_f32(bytes, offset);
  }
  return table;
}

void write_remap_table(const std::filesystem::path& path, const RemapTable& table) {
  detail::write_file(path, encode_remap_table(table));
}

RemapTable read_remap_table(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_remap_table(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void FusionWeights::validate() const {
  affine.validate("fusion");
  if (affine.in != 2 * affine.out) {
    throw ConfigError("fusion weights must map 2C -> C, got " + std::to_string(affine.in) +
                      " -> " + std::to_string(affine.out));
  }
}

FusionWeights FusionWeights::seeded(std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  return {Affine::seeded(2 * channels, channels, rng)};
}

FusionWeights FusionWeights::from_blocks(const Affine& left, const Affine& right) {
  if (left.in != right.in || left.out != right.out || left.in != left.out) {
    throw ConfigError("fusion blocks must both be C x C");
  }
  const std::size_t c = left.out;
  FusionWeights f{Affine(2 * c, c)};
  for (std::size_t o = 0; o < c; ++o) {
    for (std::size_t i = 0; i < c; ++i) {
      f.affine.w(o, i) = left.w(o, i);
      f.affine.w(o, c + i) = right.w(o, i);
    }
    f.affine.bias[o] = left.bias[o] + right.bias[o];
  }
  return f;
}

void FusionWeights::to_bundle(TensorBundle& bundle, const std::string& prefix) const {
  bundle.put_affine(prefix, affine);
}

FusionWeights FusionWeights::from_bundle(const TensorBundle& bundle, const std::string& prefix) {
  FusionWeights f{bundle.get_affine(prefix)};
  f.validate();
  return f;
}

FeatureMap fuse_concat_affine(const FeatureMap& a, const FeatureMap& b,
                              const FusionWeights& weights, int threads) {
  weights.validate();
  if (!a.same_shape(b)) throw ConfigError("fuse_concat_affine: input maps differ in shape");
  if (a.channels() != weights.channels()) {
    throw ConfigError("fuse_concat_affine: maps have " + std::to_string(a.channels()) +
                      " channels, weights expect " + std::to_string(weights.channels()));
  }
  const std::size_t c = a.channels();
  FeatureMap out(a.height(), a.width(), c);
  parallel_for(a.cells(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> joined(2 * c);
    for (std::size_t cell = begin; cell < end; ++cell) {
      std::copy(a.cell(cell).begin(), a.cell(cell).end(), joined.begin());
      std::copy(b.cell(cell).begin(), b.cell(cell).end(), joined.begin() + static_cast<std::ptrdiff_t>(c));
      weights.affine.apply(joined, out.cell(cell));
    }
  });
  return out;
}

PointMatrix fused_output_features(const FeatureMap& f_cart, const FeatureMap& f_polar,
                                  const RemapTable& polar_to_cart,
                                  const CartesianGridSpec& cart_grid, const PointCloud& cloud,
                                  int threads) {
  if (polar_to_cart.dest_height != f_cart.height() || polar_to_cart.dest_width != f_cart.width() ||
      f_cart.height() != cart_grid.rows() || f_cart.width() != cart_grid.cols()) {
    throw ConfigError("fused_output_features: table, cartesian map and grid disagree");
  }
  const FeatureMap remapped = apply_remap(polar_to_cart, f_polar, threads);
  const ContinuousSampleCoords coords = sample_coords(cloud, cart_grid, threads);
  // One bilinear pass over the channel-concatenated map [f_cart | remapped];
  // the concatenation is never materialized.
  const std::size_t c_left = f_cart.channels();
  const std::size_t c_right = remapped.channels();
  const std::size_t w = f_cart.width();
  const std::size_t last_row = f_cart.height() - 1;
  const std::size_t last_col = w - 1;
  PointMatrix out(coords.size(), c_left + c_right);
  parallel_for(coords.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!coords.valid[i]) continue;
      const auto r0 = static_cast<std::size_t>(coords.row[i]);
      const auto c0 = static_cast<std::size_t>(coords.col[i]);
      const std::size_t r1 = std::min(r0 + 1, last_row);
      const std::size_t c1 = std::min(c0 + 1, last_col);
      const double fr = coords.row[i] - static_cast<double>(r0);
      const double fc = coords.col[i] - static_cast<double>(c0);
      const float wt[4] = {static_cast<float>((1.0 - fr) * (1.0 - fc)),
                           static_cast<float>((1.0 - fr) * fc), static_cast<float>(fr * (1.0 - fc)),
                           static_cast<float>(fr * fc)};
      const std::size_t cells[4] = {r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1};
      float* dst = out.row(i).data();
      for (const FeatureMap* map : {&f_cart, &remapped}) {
        const std::size_t channels = map->channels();
        const float* s0 = map->cell(cells[0]).data();
        const float* s1 = map->cell(cells[1]).data();
        const float* s2 = map->cell(cells[2]).data();
        const float* s3 = map->cell(cells[3]).data();
        for (std::size_t ch = 0; ch < channels; ++ch) {
          dst[ch] = wt[0] * s0[ch] + wt[1] * s1[ch] + wt[2] * s2[ch] + wt[3] * s3[ch];
        }
        dst += channels;
      }
    }
  });
  return out;
}

CoverageStats coverage_stats(const CellAssignment& assignment, std::size_t height,
                             std::size_t width) {
  CoverageStats stats;
  stats.total_cells = height * width;
  std::vector<std::uint8_t> seen(stats.total_cells, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (!assignment.valid[i]) continue;
    const std::size_t cell = static_cast<std::size_t>(assignment.row[i]) * width +
                             static_cast<std::size_t>(assignment.col[i]);
    if (cell >= seen.size()) throw ConfigError("coverage_stats: assignment exceeds grid dims");
    if (!seen[cell]) {
      seen[cell] = 1;
      ++stats.occupied_cells;
    }
  }
  stats.occupancy_fraction =
      stats.total_cells ? static_cast<double>(stats.occupied_cells) / stats.total_cells : 0.0;
  return stats;
}

}  // namespace pcbev
