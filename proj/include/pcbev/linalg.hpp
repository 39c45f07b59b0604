#pragma once

// Small dense building blocks shared by the encoder, fusion head, backbone
// and classifier. Everything is float32, row-major.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pcbev {

class Rng;

/// N rows of D floats: per-point or per-token feature vectors.
class PointMatrix {
public:
  PointMatrix() = default;
  PointMatrix(std::size_t rows, std::size_t dim, float fill = 0.0f)
      : rows_(rows), dim_(dim), data_(rows * dim, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  float& at(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  friend bool operator==(const PointMatrix&, const PointMatrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// y = W x + b with W stored (out x in) row-major.
struct Affine {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  Affine() = default;
  Affine(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0f), bias(out_dim, 0.0f) {}

  float& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  float w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }

  /// Throws ConfigError if buffer sizes disagree with (in, out).
  void validate(const char* what) const;
  void apply(std::span<const float> x, std::span<float> y) const;

  static Affine identity(std::size_t dim);
  /// Uniform in +-sqrt(6 / (in + out)) for weights, +-0.1 for biases.
  static Affine seeded(std::size_t in_dim, std::size_t out_dim, Rng& rng);
};

/// Applies the affine map to every row.
PointMatrix apply_rows(const Affine& layer, const PointMatrix& x, int threads = 1);
void relu_inplace(std::span<float> values);

/// Per-token normalization followed by an elementwise affine (gamma, beta).
struct LayerNorm {
  std::vector<float> gamma;
  std::vector<float> beta;
  float epsilon = 1e-5f;

  static LayerNorm unit(std::size_t dim);
  void apply(std::span<const float> x, std::span<float> y) const;
};

}  // namespace pcbev
