#include "pcbev/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcbev/errors.hpp"
#include "pcbev/parallel.hpp"
#include "pcbev/rng.hpp"
#include "pcbev/weights_io.hpp"

namespace pcbev {

void PatchEmbedding::validate(std::size_t height, std::size_t width, std::size_t channels) const {
  const std::size_t n = patches_per_side;
  if (n == 0 || height % n != 0 || width % n != 0) {
    throw ConfigError("patch embedding: " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible into " + std::to_string(n) + "x" + std::to_string(n) +
                      " patches");
  }
  projection.validate("patch projection");
  pe_merge.validate("positional merge");
  const std::size_t patch_inputs = (height / n) * (width / n) * channels;
  if (projection.in != patch_inputs || projection.out != embed_dim) {
    throw ConfigError("patch projection is " + std::to_string(projection.in) + " -> " +
                      std::to_string(projection.out) + ", map needs " +
                      std::to_string(patch_inputs) + " -> " + std::to_string(embed_dim));
  }
  if (pe_merge.in != 2 * embed_dim || pe_merge.out != embed_dim) {
    throw ConfigError("positional merge must map 2*embed_dim -> embed_dim");
  }
}

PatchEmbedding PatchEmbedding::seeded(std::size_t height, std::size_t width, std::size_t channels,
                                      std::size_t patches_per_side, std::size_t embed_dim,
                                      std::uint64_t seed) {
  if (patches_per_side == 0 || height % patches_per_side || width % patches_per_side) {
    throw ConfigError("patch embedding: map is not divisible into patches");
  }
  Rng rng(seed);
  PatchEmbedding pe;
  pe.patches_per_side = patches_per_side;
  pe.embed_dim = embed_dim;
  const std::size_t inputs =
      (height / patches_per_side) * (width / patches_per_side) * channels;
  pe.projection = Affine::seeded(inputs, embed_dim, rng);
  pe.pe_merge = Affine::seeded(2 * embed_dim, embed_dim, rng);
  return pe;
}

std::vector<float> sine_positional_encoding(std::size_t position, std::size_t dim) {
  std::vector<float> pe(dim, 0.0f);
  for (std::size_t k = 0; 2 * k < dim; ++k) {
    const double angle =
        static_cast<double>(position) /
        std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(dim));
    pe[2 * k] = static_cast<float>(std::sin(angle));
    if (2 * k + 1 < dim) pe[2 * k + 1] = static_cast<float>(std::cos(angle));
  }
  return pe;
}

PointMatrix embed_patches(const FeatureMap& map, const PatchEmbedding& pe, int threads) {
  pe.validate(map.height(), map.width(), map.channels());
  const std::size_t n = pe.patches_per_side;
  const std::size_t ph = map.height() / n;
  const std::size_t pw = map.width() / n;
  const std::size_t c = map.channels();
  PointMatrix tokens(n * n, pe.embed_dim);
  parallel_for(n * n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> flat(ph * pw * c);
    std::vector<float> joined(2 * pe.embed_dim, 0.0f);
    for (std::size_t t = begin; t < end; ++t) {
      const std::size_t pi = t / n;
      const std::size_t pj = t % n;
      auto it = flat.begin();
      for (std::size_t r = 0; r < ph; ++r) {
        for (std::size_t q = 0; q < pw; ++q) {
          auto cell = map.cell(pi * ph + r, pj * pw + q);
          it = std::copy(cell.begin(), cell.end(), it);
        }
      }
      pe.projection.apply(flat, {joined.data(), pe.embed_dim});
      if (pe.positional_encoding) {
        const auto enc = sine_positional_encoding(t, pe.embed_dim);
        std::copy(enc.begin(), enc.end(), joined.begin() + static_cast<std::ptrdiff_t>(pe.embed_dim));
      }
      pe.pe_merge.apply(joined, tokens.row(t));
    }
  });
  return tokens;
}

void AttentionBlockWeights::validate() const {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: " + std::to_string(heads) + " heads do not divide dim " +
                      std::to_string(dim));
  }
  for (const Affine* a : {&query, &key, &value, &output}) {
    a->validate("attention projection");
    if (a->in != dim || a->out != dim) throw ConfigError("attention projections must be dim x dim");
  }
  ffn_in.validate("ffn");
  ffn_out.validate("ffn");
  if (ffn_in.in != dim || ffn_out.out != dim || ffn_out.in != ffn_in.out) {
    throw ConfigError("ffn layers do not chain dim -> hidden -> dim");
  }
  if (pre_norm) {
    for (const LayerNorm* ln : {&norm_attn, &norm_ffn}) {
      if (ln->gamma.size() != dim || ln->beta.size() != dim) {
        throw ConfigError("layer norm parameters must have dim entries");
      }
    }
  }
}

AttentionBlockWeights AttentionBlockWeights::seeded(std::size_t dim, std::size_t heads,
                                                    std::size_t ffn_dim, std::uint64_t seed,
                                                    bool pre_norm) {
  Rng rng(seed);
  AttentionBlockWeights w;
  w.dim = dim;
  w.heads = heads;
  w.pre_norm = pre_norm;
  w.norm_attn = LayerNorm::unit(dim);
  w.norm_ffn = LayerNorm::unit(dim);
  w.query = Affine::seeded(dim, dim, rng);
  w.key = Affine::seeded(dim, dim, rng);
  w.value = Affine::seeded(dim, dim, rng);
  w.output = Affine::seeded(dim, dim, rng);
  w.ffn_in = Affine::seeded(dim, ffn_dim, rng);
  w.ffn_out = Affine::seeded(ffn_dim, dim, rng);
  w.validate();
  return w;
}

namespace {

PointMatrix normalized(const PointMatrix& seq, const LayerNorm& norm, bool enabled) {
  if (!enabled) return seq;
  PointMatrix out(seq.rows(), seq.dim());
  for (std::size_t t = 0; t < seq.rows(); ++t) norm.apply(seq.row(t), out.row(t));
  return out;
}

struct Projected {
  PointMatrix q, k, v;
};

Projected project_qkv(const PointMatrix& seq, const AttentionBlockWeights& w) {
  const PointMatrix x = normalized(seq, w.norm_attn, w.pre_norm);
  return {apply_rows(w.query, x), apply_rows(w.key, x), apply_rows(w.value, x)};
}

PointMatrix head_softmax(const Projected& p, std::size_t head, std::size_t head_dim) {
  const std::size_t tokens = p.q.rows();
  const std::size_t offset = head * head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  PointMatrix probs(tokens, tokens);
  std::vector<double> logits(tokens);
  for (std::size_t i = 0; i < tokens; ++i) {
    double peak = -INFINITY;
    for (std::size_t j = 0; j < tokens; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < head_dim; ++d) {
        dot += static_cast<double>(p.q.at(i, offset + d)) * p.k.at(j, offset + d);
      }
      logits[j] = dot * scale;
      peak = std::max(peak, logits[j]);
    }
    double total = 0.0;
    for (double& l : logits) {
      l = std::exp(l - peak);
      total += l;
    }
    for (std::size_t j = 0; j < tokens; ++j) probs.at(i, j) = static_cast<float>(logits[j] / total);
  }
  return probs;
}

}  // namespace

std::vector<PointMatrix> attention_weights(const PointMatrix& seq, const AttentionBlockWeights& w) {
  w.validate();
  const Projected p = project_qkv(seq, w);
  std::vector<PointMatrix> heads;
  for (std::size_t h = 0; h < w.heads; ++h) heads.push_back(head_softmax(p, h, w.head_dim()));
  return heads;
}

PointMatrix self_attention(const PointMatrix& seq, const AttentionBlockWeights& w) {
  w.validate();
  if (seq.dim() != w.dim) {
    throw ConfigError("attention expects " + std::to_string(w.dim) + "-dim tokens, got " +
                      std::to_string(seq.dim()));
  }
  const Projected p = project_qkv(seq, w);
  const std::size_t tokens = seq.rows();
  const std::size_t dh = w.head_dim();
  PointMatrix mixed(tokens, w.dim);
  for (std::size_t h = 0; h < w.heads; ++h) {
    const PointMatrix probs = head_softmax(p, h, dh);
    for (std::size_t i = 0; i < tokens; ++i) {
      for (std::size_t d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) acc += static_cast<double>(probs.at(i, j)) * p.v.at(j, h * dh + d);
        mixed.at(i, h * dh + d) = static_cast<float>(acc);
      }
    }
  }
  PointMatrix out = apply_rows(w.output, mixed);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += seq.data()[i];
  return out;
}

PointMatrix mhsa_ffn(const PointMatrix& seq, const AttentionBlockWeights& w) {
  PointMatrix y = self_attention(seq, w);
  const PointMatrix x = normalized(y, w.norm_ffn, w.pre_norm);
  PointMatrix hidden = apply_rows(w.ffn_in, x);
  relu_inplace(hidden.data());
  const PointMatrix ffn = apply_rows(w.ffn_out, hidden);
  for (std::size_t i = 0; i < y.data().size(); ++i) y.data()[i] += ffn.data()[i];
  return y;
}

FeatureMap tokens_to_grid(const PointMatrix& seq, std::size_t patches_per_side) {
  if (seq.rows() != patches_per_side * patches_per_side) {
    throw ConfigError("token count " + std::to_string(seq.rows()) + " is not " +
                      std::to_string(patches_per_side) + "^2");
  }
  FeatureMap grid(patches_per_side, patches_per_side, seq.dim());
  std::copy(seq.data().begin(), seq.data().end(), grid.data().begin());
  return grid;
}

FeatureMap upsample_bilinear(const FeatureMap& grid, std::size_t height, std::size_t width,
                             int threads) {
  if (grid.height() == 0 || grid.width() == 0 || grid.height() > height || grid.width() > width) {
    throw ConfigError("upsample_bilinear: source grid must be non-empty and no larger than target");
  }
  const std::size_t c = grid.channels();
  FeatureMap out(height, width, c);
  auto source_pos = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) /
                           static_cast<double>(n_out - 1)
                     : 0.0;
  };
  parallel_for(height, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const double sr = source_pos(r, height, grid.height());
      const auto r0 = static_cast<std::size_t>(sr);
      const std::size_t r1 = std::min(r0 + 1, grid.height() - 1);
      const double fr = sr - static_cast<double>(r0);
      for (std::size_t q = 0; q < width; ++q) {
        const double sc = source_pos(q, width, grid.width());
        const auto c0 = static_cast<std::size_t>(sc);
        const std::size_t c1 = std::min(c0 + 1, grid.width() - 1);
        const double fc = sc - static_cast<double>(c0);
        const auto w00 = static_cast<float>((1.0 - fr) * (1.0 - fc));
        const auto w01 = static_cast<float>((1.0 - fr) * fc);
        const auto w10 = static_cast<float>(fr * (1.0 - fc));
        const auto w11 = static_cast<float>(fr * fc);
        auto a = grid.cell(r0, c0);
        auto b = grid.cell(r0, c1);
        auto d = grid.cell(r1, c0);
        auto e = grid.cell(r1, c1);
        auto dst = out.cell(r, q);
        for (std::size_t ch = 0; ch < c; ++ch) {
          dst[ch] = w00 * a[ch] + w01 * b[ch] + w10 * d[ch] + w11 * e[ch];
        }
      }
    }
  });
  return out;
}

FeatureMap apply_channel_affine(const FeatureMap& map, const Affine& layer, int threads) {
  layer.validate("channel affine");
  if (map.channels() != layer.in) {
    throw ConfigError("channel affine expects " + std::to_string(layer.in) + " channels, got " +
                      std::to_string(map.channels()));
  }
  FeatureMap out(map.height(), map.width(), layer.out);
  parallel_for(map.cells(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t cell = begin; cell < end; ++cell) layer.apply(map.cell(cell), out.cell(cell));
  });
  return out;
}

FeatureMap enhance(const FeatureMap& map, const FeatureMap& upsampled) {
  if (!map.same_shape(upsampled)) {
    throw ConfigError("enhance: map is " + std::to_string(map.height()) + "x" +
                      std::to_string(map.width()) + "x" + std::to_string(map.channels()) +
                      ", upsampled is " + std::to_string(upsampled.height()) + "x" +
                      std::to_string(upsampled.width()) + "x" +
                      std::to_string(upsampled.channels()));
  }
  FeatureMap out = map;
  auto dst = out.data();
  auto add = upsampled.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
  return out;
}

void Conv2d::validate(const char* what) const {
  if (kernel % 2 == 0 || weight.size() != kernel * kernel * in * out || bias.size() != out) {
    throw ConfigError(std::string(what) + ": conv buffers do not match an odd " +
                      std::to_string(kernel) + "x" + std::to_string(kernel) + " kernel " +
                      std::to_string(in) + " -> " + std::to_string(out));
  }
}

Conv2d Conv2d::seeded(std::size_t k, std::size_t in_ch, std::size_t out_ch, std::uint64_t seed) {
  Rng rng(seed);
  Conv2d conv(k, in_ch, out_ch);
  const double bound = std::sqrt(6.0 / static_cast<double>(k * k * (in_ch + out_ch)));
  for (float& v : conv.weight) v = static_cast<float>(rng.uniform(-bound, bound));
  for (float& v : conv.bias) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  return conv;
}

FeatureMap conv2d(const FeatureMap& map, const Conv2d& conv, int threads) {
  conv.validate("conv2d");
  if (map.channels() != conv.in) {
    throw ConfigError("conv2d expects " + std::to_string(conv.in) + " channels, got " +
                      std::to_string(map.channels()));
  }
  const std::size_t h = map.height();
  const std::size_t w = map.width();
  const auto half = static_cast<std::ptrdiff_t>(conv.kernel / 2);
  FeatureMap out(h, w, conv.out);
  parallel_for(h, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t q = 0; q < w; ++q) {
        float* acc = out.cell(r, q).data();
        std::copy(conv.bias.begin(), conv.bias.end(), acc);
        for (std::size_t ky = 0; ky < conv.kernel; ++ky) {
          const auto sr = static_cast<std::ptrdiff_t>(r + ky) - half;
          if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < conv.kernel; ++kx) {
            const auto sc = static_cast<std::ptrdiff_t>(q + kx) - half;
            if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(w)) continue;
            const float* x = map.cell(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc)).data();
            const float* k = conv.weight.data() + (ky * conv.kernel + kx) * conv.in * conv.out;
            for (std::size_t i = 0; i < conv.in; ++i) {
              const float xi = x[i];
              const float* ki = k + i * conv.out;
              for (std::size_t o = 0; o < conv.out; ++o) acc[o] += ki[o] * xi;
            }
          }
        }
      }
    }
  });
  return out;
}

FeatureMap max_pool2(const FeatureMap& map) {
  FeatureMap out(map.height() / 2, map.width() / 2, map.channels());
  for (std::size_t r = 0; r < out.height(); ++r) {
    for (std::size_t q = 0; q < out.width(); ++q) {
      auto dst = out.cell(r, q);
      auto a = map.cell(2 * r, 2 * q);
      auto b = map.cell(2 * r, 2 * q + 1);
      auto c = map.cell(2 * r + 1, 2 * q);
      auto d = map.cell(2 * r + 1, 2 * q + 1);
      for (std::size_t ch = 0; ch < dst.size(); ++ch) {
        dst[ch] = std::max(std::max(a[ch], b[ch]), std::max(c[ch], d[ch]));
      }
    }
  }
  return out;
}

void MiniCnnWeights::validate() const {
  down.validate("cnn down conv");
  bottleneck.validate("cnn bottleneck conv");
  head.validate("cnn head conv");
  if (bottleneck.in != down.out || bottleneck.out != down.out || head.in != down.out) {
    throw ConfigError("cnn stand-in layers do not chain");
  }
  if (head.kernel != 1) throw ConfigError("cnn head must be 1x1");
}

MiniCnnWeights MiniCnnWeights::seeded(std::size_t in_ch, std::size_t mid_ch, std::size_t out_ch,
                                      std::uint64_t seed) {
  Rng rng(seed);
  return {Conv2d::seeded(3, in_ch, mid_ch, rng.bits()), Conv2d::seeded(3, mid_ch, mid_ch, rng.bits()),
          Conv2d::seeded(1, mid_ch, out_ch, rng.bits())};
}

FeatureMap mini_cnn(const FeatureMap& map, const MiniCnnWeights& w, int threads) {
  w.validate();
  if (map.height() % 2 || map.width() % 2 || map.height() == 0 || map.width() == 0) {
    throw ConfigError("mini_cnn needs even, non-zero H and W, got " + std::to_string(map.height()) +
                      "x" + std::to_string(map.width()));
  }
  FeatureMap skip = conv2d(map, w.down, threads);
  relu_inplace(skip.data());
  FeatureMap deep = conv2d(max_pool2(skip), w.bottleneck, threads);
  relu_inplace(deep.data());
  const FeatureMap up = upsample_bilinear(deep, map.height(), map.width(), threads);
  return conv2d(enhance(skip, up), w.head, threads);
}

void ClassifierWeights::validate() const {
  hidden.validate("classifier hidden");
  output.validate("classifier output");
  if (output.in != hidden.out) throw ConfigError("classifier layers do not chain");
}

ClassifierWeights ClassifierWeights::seeded(std::size_t in_dim, std::size_t hidden_dim,
                                            std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  return {Affine::seeded(in_dim, hidden_dim, rng), Affine::seeded(hidden_dim, classes, rng)};
}

PointMatrix classify_points(const PointMatrix& point_features, const ClassifierWeights& w,
                            int threads) {
  w.validate();
  PointMatrix hidden = apply_rows(w.hidden, point_features, threads);
  relu_inplace(hidden.data());
  return apply_rows(w.output, hidden, threads);
}

std::vector<std::uint16_t> argmax_labels(const PointMatrix& scores) {
  std::vector<std::uint16_t> labels(scores.rows(), 0);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    labels[i] = static_cast<std::uint16_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return labels;
}

BranchBackbone BranchBackbone::seeded(std::size_t height, std::size_t width, std::size_t channels,
                                      const BackboneConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  BranchBackbone net;
  net.embedding = PatchEmbedding::seeded(height, width, channels, cfg.patches_per_side,
                                         cfg.embed_dim, rng.bits());
  net.embedding.positional_encoding = cfg.positional_encoding;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    net.blocks.push_back(AttentionBlockWeights::seeded(cfg.embed_dim, cfg.heads, cfg.ffn_dim,
                                                       rng.bits(), cfg.pre_norm));
  }
  Rng adapter_rng(rng.bits());
  net.adapter = Affine::seeded(cfg.embed_dim, channels, adapter_rng);
  net.cnn = MiniCnnWeights::seeded(channels, cfg.cnn_mid, channels, rng.bits());
  return net;
}

namespace {

void put_conv(TensorBundle& bundle, const std::string& prefix, const Conv2d& conv) {
  bundle.add(prefix + ".weight", {conv.kernel, conv.kernel, conv.in, conv.out}, conv.weight);
  bundle.add(prefix + ".bias", {conv.out}, conv.bias);
}

Conv2d get_conv(const TensorBundle& bundle, const std::string& prefix) {
  const Tensor& w = bundle.get(prefix + ".weight");
  if (w.shape.size() != 4 || w.shape[0] != w.shape[1]) {
    throw ConfigError("weights: " + prefix + ".weight must be [k, k, in, out]");
  }
  Conv2d conv(w.shape[0], w.shape[2], w.shape[3]);
  conv.weight = w.values;
  conv.bias = bundle.get(prefix + ".bias", {conv.out}).values;
  return conv;
}

}  // namespace

void BranchBackbone::to_bundle(TensorBundle& bundle, const std::string& prefix) const {
  bundle.put_affine(prefix + "embed.projection", embedding.projection);
  bundle.put_affine(prefix + "embed.merge", embedding.pe_merge);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto p = prefix + "block" + std::to_string(b) + ".";
    const auto& w = blocks[b];
    if (w.pre_norm) {
      bundle.put_layer_norm(p + "norm_attn", w.norm_attn);
      bundle.put_layer_norm(p + "norm_ffn", w.norm_ffn);
    }
    bundle.put_affine(p + "query", w.query);
    bundle.put_affine(p + "key", w.key);
    bundle.put_affine(p + "value", w.value);
    bundle.put_affine(p + "output", w.output);
    bundle.put_affine(p + "ffn_in", w.ffn_in);
    bundle.put_affine(p + "ffn_out", w.ffn_out);
  }
  bundle.put_affine(prefix + "adapter", adapter);
  put_conv(bundle, prefix + "cnn.down", cnn.down);
  put_conv(bundle, prefix + "cnn.bottleneck", cnn.bottleneck);
  put_conv(bundle, prefix + "cnn.head", cnn.head);
}

BranchBackbone BranchBackbone::from_bundle(const TensorBundle& bundle, const std::string& prefix,
                                           const BackboneConfig& cfg) {
  BranchBackbone net;
  net.embedding.patches_per_side = cfg.patches_per_side;
  net.embedding.embed_dim = cfg.embed_dim;
  net.embedding.positional_encoding = cfg.positional_encoding;
  net.embedding.projection = bundle.get_affine(prefix + "embed.projection");
  net.embedding.pe_merge = bundle.get_affine(prefix + "embed.merge");
  for (std::size_t b = 0; bundle.contains(prefix + "block" + std::to_string(b) + ".query.weight");
       ++b) {
    const auto p = prefix + "block" + std::to_string(b) + ".";
    AttentionBlockWeights w;
    w.dim = cfg.embed_dim;
    w.heads = cfg.heads;
    w.pre_norm = bundle.contains(p + "norm_attn.gamma");
    if (w.pre_norm) {
      w.norm_attn = bundle.get_layer_norm(p + "norm_attn");
      w.norm_ffn = bundle.get_layer_norm(p + "norm_ffn");
    }
    w.query = bundle.get_affine(p + "query");
    w.key = bundle.get_affine(p + "key");
    w.value = bundle.get_affine(p + "value");
    w.output = bundle.get_affine(p + "output");
    w.ffn_in = bundle.get_affine(p + "ffn_in");
    w.ffn_out = bundle.get_affine(p + "ffn_out");
    w.validate();
    net.blocks.push_back(std::move(w));
  }
  net.adapter = bundle.get_affine(prefix + "adapter");
  net.cnn = {get_conv(bundle, prefix + "cnn.down"), get_conv(bundle, prefix + "cnn.bottleneck"),
             get_conv(bundle, prefix + "cnn.head")};
  net.cnn.validate();
  return net;
}

FeatureMap backbone_forward(const FeatureMap& map, const BranchBackbone& net, int threads) {
  PointMatrix tokens = embed_patches(map, net.embedding, threads);
  for (const auto& block : net.blocks) tokens = mhsa_ffn(tokens, block);
  const FeatureMap grid =
      apply_channel_affine(tokens_to_grid(tokens, net.embedding.patches_per_side), net.adapter, threads);
  const FeatureMap upsampled = upsample_bilinear(grid, map.height(), map.width(), threads);
  return mini_cnn(enhance(map, upsampled), net.cnn, threads);
}

}  // namespace pcbev
