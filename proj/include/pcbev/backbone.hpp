#pragma once

// Forward-only Transformer-CNN mixture for one BEV branch:
//
//   map -> n x n patch embedding (+ sine positional encoding, merged by an
//   affine) -> transformer blocks (MHSA + FFN) -> n x n token grid ->
//   channel adapter -> bilinear upsample to H x W -> add to the input map ->
//   small conv encoder-decoder.
//
// All bilinear resampling here uses align-corners semantics.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcbev/feature_map.hpp"
#include "pcbev/linalg.hpp"

namespace pcbev {

class TensorBundle;

struct PatchEmbedding {
  std::size_t patches_per_side = 8;
  std::size_t embed_dim = 128;
  Affine projection;  // (H/n)(W/n)C -> embed_dim, patch flattened row-major
  Affine pe_merge;    // [embedding; PE] (2 embed_dim) -> embed_dim
  bool positional_encoding = true;

  /// Throws ConfigError if H or W is not divisible by n or weights do not fit.
  void validate(std::size_t height, std::size_t width, std::size_t channels) const;
  static PatchEmbedding seeded(std::size_t height, std::size_t width, std::size_t channels,
                               std::size_t patches_per_side, std::size_t embed_dim,
                               std::uint64_t seed);
};

/// Channel 2k = sin(pos / 10000^(2k/dim)), channel 2k+1 = cos of the same.
std::vector<float> sine_positional_encoding(std::size_t position, std::size_t dim);

/// n*n tokens, patch (pi, pj) at index pi*n + pj.
PointMatrix embed_patches(const FeatureMap& map, const PatchEmbedding& pe, int threads = 1);

struct AttentionBlockWeights {
  std::size_t dim = 0;
  std::size_t heads = 1;
  bool pre_norm = true;
  LayerNorm norm_attn;
  LayerNorm norm_ffn;
  Affine query;   // dim -> dim, head h owns output slice [h*d_h, (h+1)*d_h)
  Affine key;
  Affine value;
  Affine output;  // concatenated heads -> dim
  Affine ffn_in;  // dim -> ffn width
  Affine ffn_out; // ffn width -> dim

  std::size_t head_dim() const { return heads ? dim / heads : 0; }
  void validate() const;
  static AttentionBlockWeights seeded(std::size_t dim, std::size_t heads, std::size_t ffn_dim,
                                      std::uint64_t seed, bool pre_norm = true);
};

/// Softmax(Q K^T / sqrt(d_h)) for every head: heads.size() == w.heads, each T x T.
std::vector<PointMatrix> attention_weights(const PointMatrix& seq, const AttentionBlockWeights& w);

/// x + Out(Concat_h(Attn_h)) -- the attention half with its residual.
PointMatrix self_attention(const PointMatrix& seq, const AttentionBlockWeights& w);

/// Attention half followed by y + FFN(y), FFN = affine -> ReLU -> affine.
/// With pre_norm, each half reads a layer-normalized copy of its input.
PointMatrix mhsa_ffn(const PointMatrix& seq, const AttentionBlockWeights& w);

/// Token sequence -> n x n x C grid (token pi*n + pj at row pi, col pj).
FeatureMap tokens_to_grid(const PointMatrix& seq, std::size_t patches_per_side);

/// Align-corners bilinear resize. Requires grid dims <= target dims.
FeatureMap upsample_bilinear(const FeatureMap& grid, std::size_t height, std::size_t width,
                             int threads = 1);

FeatureMap apply_channel_affine(const FeatureMap& map, const Affine& layer, int threads = 1);

/// Elementwise map + upsampled; ConfigError on shape mismatch.
FeatureMap enhance(const FeatureMap& map, const FeatureMap& upsampled);

/// Square kernel, zero padding, stride 1. Weight layout is
/// [ky][kx][in][out] so the innermost loop runs over output channels.
struct Conv2d {
  std::size_t kernel = 1;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  Conv2d() = default;
  Conv2d(std::size_t k, std::size_t in_ch, std::size_t out_ch)
      : kernel(k), in(in_ch), out(out_ch), weight(k * k * in_ch * out_ch, 0.0f), bias(out_ch, 0.0f) {}

  float& w(std::size_t ky, std::size_t kx, std::size_t i, std::size_t o) {
    return weight[((ky * kernel + kx) * in + i) * out + o];
  }
  float w(std::size_t ky, std::size_t kx, std::size_t i, std::size_t o) const {
    return weight[((ky * kernel + kx) * in + i) * out + o];
  }
  void validate(const char* what) const;
  static Conv2d seeded(std::size_t k, std::size_t in_ch, std::size_t out_ch, std::uint64_t seed);
};

FeatureMap conv2d(const FeatureMap& map, const Conv2d& conv, int threads = 1);
FeatureMap max_pool2(const FeatureMap& map);

/// Stand-in encoder-decoder: conv3x3 -> ReLU -> maxpool 2 -> conv3x3 ->
/// ReLU -> bilinear x2 -> add skip -> conv1x1.
struct MiniCnnWeights {
  Conv2d down;
  Conv2d bottleneck;
  Conv2d head;

  void validate() const;
  std::size_t output_channels() const { return head.out; }
  static MiniCnnWeights seeded(std::size_t in_ch, std::size_t mid_ch, std::size_t out_ch,
                               std::uint64_t seed);
};

/// Requires even H and W.
FeatureMap mini_cnn(const FeatureMap& map, const MiniCnnWeights& w, int threads = 1);

struct ClassifierWeights {
  Affine hidden;
  Affine output;

  std::size_t classes() const { return output.out; }
  void validate() const;
  static ClassifierWeights seeded(std::size_t in_dim, std::size_t hidden_dim, std::size_t classes,
                                  std::uint64_t seed);
};

/// Per-point affine -> ReLU -> affine to class scores.
PointMatrix classify_points(const PointMatrix& point_features, const ClassifierWeights& w,
                            int threads = 1);
/// Index of the largest score per row; ties go to the lower class id.
std::vector<std::uint16_t> argmax_labels(const PointMatrix& scores);

struct BackboneConfig {
  std::size_t patches_per_side = 8;
  std::size_t embed_dim = 128;
  std::size_t heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t blocks = 2;
  std::size_t cnn_mid = 32;
  bool pre_norm = true;
  bool positional_encoding = true;
};

struct BranchBackbone {
  PatchEmbedding embedding;
  std::vector<AttentionBlockWeights> blocks;
  Affine adapter;  // embed_dim -> C
  MiniCnnWeights cnn;

  static BranchBackbone seeded(std::size_t height, std::size_t width, std::size_t channels,
                               const BackboneConfig& cfg, std::uint64_t seed);
  void to_bundle(TensorBundle& bundle, const std::string& prefix) const;
  static BranchBackbone from_bundle(const TensorBundle& bundle, const std::string& prefix,
                                    const BackboneConfig& cfg);
};

/// Transformer stage, additive enhancement, then the conv stand-in. The
/// adapter is applied on the n x n token grid before upsampling, which is
/// the same map as adapting after (bilinear weights sum to one).
FeatureMap backbone_forward(const FeatureMap& map, const BranchBackbone& net, int threads = 1);

}  // namespace pcbev
