#include "pcbev/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcbev/errors.hpp"
#include "pcbev/parallel.hpp"
#include "pcbev/rng.hpp"

namespace pcbev {

void Affine::validate(const char* what) const {
  if (weight.size() != in * out || bias.size() != out) {
    throw ConfigError(std::string(what) + ": affine buffers do not match " + std::to_string(out) +
                      "x" + std::to_string(in));
  }
}

void Affine::apply(std::span<const float> x, std::span<float> y) const {
  for (std::size_t o = 0; o < out; ++o) {
    const float* row = weight.data() + o * in;
    float acc = bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

Affine Affine::identity(std::size_t dim) {
  Affine a(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) a.w(i, i) = 1.0f;
  return a;
}

Affine Affine::seeded(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  Affine a(in_dim, out_dim);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (float& v : a.weight) v = static_cast<float>(rng.uniform(-bound, bound));
  for (float& v : a.bias) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  return a;
}

PointMatrix apply_rows(const Affine& layer, const PointMatrix& x, int threads) {
  if (x.dim() != layer.in) {
    throw ConfigError("affine expects " + std::to_string(layer.in) + " inputs, got " +
                      std::to_string(x.dim()));
  }
  PointMatrix y(x.rows(), layer.out);
  parallel_for(x.rows(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) layer.apply(x.row(i), y.row(i));
  });
  return y;
}

void relu_inplace(std::span<float> values) {
  for (float& v : values) v = std::max(v, 0.0f);
}

LayerNorm LayerNorm::unit(std::size_t dim) {
  return {std::vector<float>(dim, 1.0f), std::vector<float>(dim, 0.0f), 1e-5f};
}

void LayerNorm::apply(std::span<const float> x, std::span<float> y) const {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + epsilon);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<float>((x[i] - mean) * inv) * gamma[i] + beta[i];
  }
}

}  // namespace pcbev
