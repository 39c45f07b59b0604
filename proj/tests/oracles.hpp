#pragma once

// Test-only scalar reference implementations. None of these call into the
// library's kernels; they recompute each quantity from the defining formula.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pcbev/backbone.hpp"
#include "pcbev/feature_map.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/linalg.hpp"
#include "pcbev/rng.hpp"

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

struct XY {
  double x, y;
};

inline XY cart_center(const pcbev::CartesianGridSpec& g, std::size_t row, std::size_t col) {
  const double cw = (g.x_max - g.x_min) / g.width;
  const double ch = (g.y_max - g.y_min) / g.height;
  return {g.x_min + (static_cast<double>(col) + 0.5) * cw,
          g.y_min + (static_cast<double>(row) + 0.5) * ch};
}

inline XY polar_center(const pcbev::PolarGridSpec& g, std::size_t row, std::size_t col) {
  const double rho = g.rho_min + (static_cast<double>(row) + 0.5) * ((g.rho_max - g.rho_min) / g.n_rho);
  const double phi = -kPi + (static_cast<double>(col) + 0.5) * (2.0 * kPi / g.n_phi);
  return {rho * std::cos(phi), rho * std::sin(phi)};
}

inline std::int64_t clamp_bin(double v, std::uint32_t n) {
  auto k = static_cast<std::int64_t>(std::floor(v));
  return std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(n) - 1);
}

/// Flat index of the cartesian cell containing (x, y), or -1.
inline std::int64_t cart_cell(const pcbev::CartesianGridSpec& g, double x, double y) {
  if (x < g.x_min || x >= g.x_max || y < g.y_min || y >= g.y_max) return -1;
  const auto col = clamp_bin((x - g.x_min) / ((g.x_max - g.x_min) / g.width), g.width);
  const auto row = clamp_bin((y - g.y_min) / ((g.y_max - g.y_min) / g.height), g.height);
  return row * g.width + col;
}

/// Flat index of the polar cell containing (x, y), standard atan2(y, x), or -1.
inline std::int64_t polar_cell(const pcbev::PolarGridSpec& g, double x, double y) {
  const double rho = std::sqrt(x * x + y * y);
  if (rho < g.rho_min || rho >= g.rho_max) return -1;
  double phi = std::atan2(y, x);
  if (phi >= kPi) phi -= 2.0 * kPi;
  const auto r = clamp_bin((rho - g.rho_min) / ((g.rho_max - g.rho_min) / g.n_rho), g.n_rho);
  const auto p = clamp_bin((phi + kPi) / (2.0 * kPi / g.n_phi), g.n_phi);
  return r * g.n_phi + p;
}

/// Per-cell brute-force nearest remap: recompute the transform for every
/// destination cell and read the source directly.
inline pcbev::FeatureMap nearest_remap_polar_to_cart(const pcbev::FeatureMap& src,
                                                     const pcbev::PolarGridSpec& polar,
                                                     const pcbev::CartesianGridSpec& cart) {
  pcbev::FeatureMap out(cart.height, cart.width, src.channels());
  for (std::size_t r = 0; r < cart.height; ++r) {
    for (std::size_t c = 0; c < cart.width; ++c) {
      const XY p = cart_center(cart, r, c);
      const auto idx = polar_cell(polar, p.x, p.y);
      if (idx < 0) continue;
      for (std::size_t ch = 0; ch < src.channels(); ++ch) {
        out.at(r, c, ch) = src.data()[static_cast<std::size_t>(idx) * src.channels() + ch];
      }
    }
  }
  return out;
}

inline pcbev::FeatureMap nearest_remap_cart_to_polar(const pcbev::FeatureMap& src,
                                                     const pcbev::CartesianGridSpec& cart,
                                                     const pcbev::PolarGridSpec& polar) {
  pcbev::FeatureMap out(polar.n_rho, polar.n_phi, src.channels());
  for (std::size_t r = 0; r < polar.n_rho; ++r) {
    for (std::size_t c = 0; c < polar.n_phi; ++c) {
      const XY p = polar_center(polar, r, c);
      const auto idx = cart_cell(cart, p.x, p.y);
      if (idx < 0) continue;
      for (std::size_t ch = 0; ch < src.channels(); ++ch) {
        out.at(r, c, ch) = src.data()[static_cast<std::size_t>(idx) * src.channels() + ch];
      }
    }
  }
  return out;
}

/// Clamp-border bilinear read at continuous (row, col), in double.
inline double bilinear(const pcbev::FeatureMap& m, double row, double col, std::size_t ch) {
  row = std::clamp(row, 0.0, static_cast<double>(m.height() - 1));
  col = std::clamp(col, 0.0, static_cast<double>(m.width() - 1));
  const double r0 = std::floor(row);
  const double c0 = std::floor(col);
  const double fr = row - r0;
  const double fc = col - c0;
  auto at = [&](double r, double c) {
    const auto rr = static_cast<std::size_t>(std::min(r, static_cast<double>(m.height() - 1)));
    const auto cc = static_cast<std::size_t>(std::min(c, static_cast<double>(m.width() - 1)));
    return static_cast<double>(m.at(rr, cc, ch));
  };
  return (1 - fr) * (1 - fc) * at(r0, c0) + (1 - fr) * fc * at(r0, c0 + 1) +
         fr * (1 - fc) * at(r0 + 1, c0) + fr * fc * at(r0 + 1, c0 + 1);
}

inline std::vector<double> affine(const pcbev::Affine& a, const std::vector<double>& x) {
  std::vector<double> y(a.out);
  for (std::size_t o = 0; o < a.out; ++o) {
    double acc = a.bias[o];
    for (std::size_t i = 0; i < a.in; ++i) acc += static_cast<double>(a.weight[o * a.in + i]) * x[i];
    y[o] = acc;
  }
  return y;
}

inline std::vector<double> layer_norm(const pcbev::LayerNorm& ln, const std::vector<double>& x) {
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = (x[i] - mean) / std::sqrt(var + ln.epsilon) * ln.gamma[i] + ln.beta[i];
  }
  return y;
}

using Seq = std::vector<std::vector<double>>;

inline Seq to_seq(const pcbev::PointMatrix& m) {
  Seq s(m.rows(), std::vector<double>(m.dim()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) s[i][j] = m.at(i, j);
  return s;
}

/// Textbook multi-head self-attention + FFN block with residuals.
inline Seq mhsa_ffn(const Seq& x, const pcbev::AttentionBlockWeights& w) {
  const std::size_t t = x.size();
  const std::size_t dh = w.dim / w.heads;
  Seq q(t), k(t), v(t);
  for (std::size_t i = 0; i < t; ++i) {
    const auto xn = w.pre_norm ? layer_norm(w.norm_attn, x[i]) : x[i];
    q[i] = affine(w.query, xn);
    k[i] = affine(w.key, xn);
    v[i] = affine(w.value, xn);
  }
  Seq y(t, std::vector<double>(w.dim, 0.0));
  for (std::size_t h = 0; h < w.heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> s(t);
      double mx = -1e300;
      for (std::size_t j = 0; j < t; ++j) {
        double d = 0;
        for (std::size_t e = 0; e < dh; ++e) d += q[i][h * dh + e] * k[j][h * dh + e];
        s[j] = d / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t j = 0; j < t; ++j)
        for (std::size_t e = 0; e < dh; ++e) y[i][h * dh + e] += s[j] / z * v[j][h * dh + e];
    }
  }
  Seq out(t);
  for (std::size_t i = 0; i < t; ++i) {
    auto a = affine(w.output, y[i]);
    for (std::size_t j = 0; j < w.dim; ++j) a[j] += x[i][j];
    const auto an = w.pre_norm ? layer_norm(w.norm_ffn, a) : a;
    auto hid = affine(w.ffn_in, an);
    for (auto& e : hid) e = std::max(e, 0.0);
    auto f = affine(w.ffn_out, hid);
    for (std::size_t j = 0; j < w.dim; ++j) f[j] += a[j];
    out[i] = f;
  }
  return out;
}

inline std::vector<double> conv(const std::vector<double>& in, std::size_t h, std::size_t w,
                                const pcbev::Conv2d& k) {
  std::vector<double> out(h * w * k.out);
  const long half = static_cast<long>(k.kernel / 2);
  for (long r = 0; r < static_cast<long>(h); ++r)
    for (long c = 0; c < static_cast<long>(w); ++c)
      for (std::size_t o = 0; o < k.out; ++o) {
        double acc = k.bias[o];
        for (long dy = -half; dy <= half; ++dy)
          for (long dx = -half; dx <= half; ++dx) {
            const long rr = r + dy, cc = c + dx;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
            for (std::size_t i = 0; i < k.in; ++i) {
              acc += k.w(static_cast<std::size_t>(dy + half), static_cast<std::size_t>(dx + half), i, o) *
                     in[(static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)) * k.in + i];
            }
          }
        out[(static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)) * k.out + o] = acc;
      }
  return out;
}

/// Align-corners bilinear resize in double.
inline std::vector<double> resize(const std::vector<double>& in, std::size_t h, std::size_t w,
                                  std::size_t ch, std::size_t H, std::size_t W) {
  std::vector<double> out(H * W * ch);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const double sr = H > 1 ? r * double(h - 1) / double(H - 1) : 0.0;
      const double sc = W > 1 ? c * double(w - 1) / double(W - 1) : 0.0;
      const std::size_t r0 = static_cast<std::size_t>(sr), c0 = static_cast<std::size_t>(sc);
      const std::size_t r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
      const double fr = sr - r0, fc = sc - c0;
      for (std::size_t k = 0; k < ch; ++k) {
        out[(r * W + c) * ch + k] = (1 - fr) * (1 - fc) * in[(r0 * w + c0) * ch + k] +
                                    (1 - fr) * fc * in[(r0 * w + c1) * ch + k] +
                                    fr * (1 - fc) * in[(r1 * w + c0) * ch + k] +
                                    fr * fc * in[(r1 * w + c1) * ch + k];
      }
    }
  return out;
}

/// conv3x3 -> ReLU -> maxpool -> conv3x3 -> ReLU -> resize x2 -> skip add -> conv1x1.
inline std::vector<double> mini_cnn(const pcbev::FeatureMap& m, const pcbev::MiniCnnWeights& w) {
  const std::size_t h = m.height(), wd = m.width();
  std::vector<double> in(m.data().begin(), m.data().end());
  auto a = conv(in, h, wd, w.down);
  for (auto& v : a) v = std::max(v, 0.0);
  const std::size_t mid = w.down.out;
  std::vector<double> p((h / 2) * (wd / 2) * mid);
  for (std::size_t r = 0; r < h / 2; ++r)
    for (std::size_t c = 0; c < wd / 2; ++c)
      for (std::size_t k = 0; k < mid; ++k) {
        double best = -1e300;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx)
            best = std::max(best, a[((2 * r + dy) * wd + 2 * c + dx) * mid + k]);
        p[(r * (wd / 2) + c) * mid + k] = best;
      }
  auto b = conv(p, h / 2, wd / 2, w.bottleneck);
  for (auto& v : b) v = std::max(v, 0.0);
  auto u = resize(b, h / 2, wd / 2, mid, h, wd);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += a[i];
  return conv(u, h, wd, w.head);
}

inline pcbev::FeatureMap random_map(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed,
                                    double lo = -1.0, double hi = 1.0) {
  pcbev::Rng rng(seed);
  pcbev::FeatureMap m(h, w, c);
  for (float& v : m.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

inline pcbev::PointMatrix random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed,
                                        double lo = -1.0, double hi = 1.0) {
  pcbev::Rng rng(seed);
  pcbev::PointMatrix m(rows, dim);
  for (float& v : m.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

}  // namespace oracle
