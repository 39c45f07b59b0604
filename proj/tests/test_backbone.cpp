#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pcbev/backbone.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/weights_io.hpp"

using namespace pcbev;

namespace {

/// [I | I] merge so the token is projection + PE.
Affine sum_merge(std::size_t d) {
  Affine a(2 * d, d);
  for (std::size_t i = 0; i < d; ++i) {
    a.w(i, i) = 1.0f;
    a.w(i, d + i) = 1.0f;
  }
  return a;
}

AttentionBlockWeights block_with_random_norms(std::size_t dim, std::size_t heads, std::uint64_t seed) {
  auto w = AttentionBlockWeights::seeded(dim, heads, 2 * dim, seed);
  Rng rng(seed + 1);
  for (auto* ln : {&w.norm_attn, &w.norm_ffn}) {
    for (float& g : ln->gamma) g = static_cast<float>(rng.uniform(0.5, 1.5));
    for (float& b : ln->beta) b = static_cast<float>(rng.uniform(-0.2, 0.2));
  }
  return w;
}

double max_diff(const PointMatrix& a, const oracle::Seq& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) worst = std::max(worst, std::abs(a.at(i, j) - b[i][j]));
  return worst;
}

}  // namespace

TEST_CASE("sine positional encoding") {
  const auto pe = sine_positional_encoding(3, 6);
  REQUIRE(pe.size() == 6);
  CHECK(pe[0] == doctest::Approx(std::sin(3.0)));
  CHECK(pe[1] == doctest::Approx(std::cos(3.0)));
  CHECK(pe[2] == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 6.0))));
  CHECK(pe[5] == doctest::Approx(std::cos(3.0 / std::pow(10000.0, 4.0 / 6.0))));
  const auto zero = sine_positional_encoding(0, 4);
  CHECK(zero == std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
}

TEST_CASE("zero map with zero-bias projection embeds to the merged PE alone") {
  auto pe = PatchEmbedding::seeded(8, 8, 2, 4, 6, 3);
  std::fill(pe.projection.bias.begin(), pe.projection.bias.end(), 0.0f);
  const auto tokens = embed_patches(FeatureMap(8, 8, 2), pe);
  REQUIRE(tokens.rows() == 16);
  for (std::size_t t = 0; t < 16; ++t) {
    std::vector<double> joined(12, 0.0);
    const auto enc = sine_positional_encoding(t, 6);
    std::copy(enc.begin(), enc.end(), joined.begin() + 6);
    const auto want = oracle::affine(pe.pe_merge, joined);
    for (std::size_t j = 0; j < 6; ++j) CHECK(tokens.at(t, j) == doctest::Approx(want[j]).epsilon(1e-6));
  }
}

TEST_CASE("one patch per side covers the whole map") {
  const auto pe = PatchEmbedding::seeded(4, 6, 3, 1, 5, 9);
  CHECK(pe.projection.in == 4 * 6 * 3);
  const auto m = oracle::random_map(4, 6, 3, 10);
  const auto tokens = embed_patches(m, pe);
  REQUIRE(tokens.rows() == 1);
  std::vector<double> flat(m.data().begin(), m.data().end());
  auto joined = oracle::affine(pe.projection, flat);
  const auto enc = sine_positional_encoding(0, 5);
  joined.insert(joined.end(), enc.begin(), enc.end());
  const auto want = oracle::affine(pe.pe_merge, joined);
  for (std::size_t j = 0; j < 5; ++j) CHECK(tokens.at(0, j) == doctest::Approx(want[j]).epsilon(1e-5));
}

TEST_CASE("4x4 map, two patches per side, identity projection") {
  FeatureMap m(4, 4, 1);
  for (std::size_t i = 0; i < 16; ++i) m.data()[i] = static_cast<float>(i);
  PatchEmbedding pe;
  pe.patches_per_side = 2;
  pe.embed_dim = 4;
  pe.projection = Affine::identity(4);
  pe.pe_merge = sum_merge(4);
  const auto tokens = embed_patches(m, pe);
  const double expected[4][4] = {
      {0.0, 2.0, 4.0, 6.0},
      {2.8414709848, 3.5403023059, 6.0099998333, 7.9999500004},
      {8.9092974268, 8.5838531635, 12.0199986667, 13.9998000067},
      {10.1411200081, 10.0100075034, 14.0299955002, 15.9995500034},
  };
  for (int t = 0; t < 4; ++t)
    for (int j = 0; j < 4; ++j) CHECK(tokens.at(t, j) == doctest::Approx(expected[t][j]).epsilon(1e-6));
}

TEST_CASE("patch embedding rejects indivisible maps") {
  const auto pe = PatchEmbedding::seeded(8, 8, 2, 4, 6, 3);
  CHECK_THROWS_AS(embed_patches(FeatureMap(9, 8, 2), pe), ConfigError);
  CHECK_THROWS_AS(PatchEmbedding::seeded(10, 8, 2, 4, 6, 3), ConfigError);
}

TEST_CASE("single token attends to itself with weight 1") {
  const auto w = block_with_random_norms(8, 2, 5);
  const auto x = oracle::random_matrix(1, 8, 6);
  const auto att = attention_weights(x, w);
  REQUIRE(att.size() == 2);
  CHECK(att[0].at(0, 0) == 1.0f);
  CHECK(att[1].at(0, 0) == 1.0f);
  // residual + Out(V(LN x))
  const auto xs = oracle::to_seq(x)[0];
  auto v = oracle::affine(w.value, oracle::layer_norm(w.norm_attn, xs));
  auto o = oracle::affine(w.output, v);
  const auto y = self_attention(x, w);
  for (std::size_t j = 0; j < 8; ++j) CHECK(y.at(0, j) == doctest::Approx(xs[j] + o[j]).epsilon(1e-5));
}

TEST_CASE("identical tokens give identical outputs") {
  const auto w = block_with_random_norms(8, 4, 7);
  PointMatrix x(2, 8);
  const auto r = oracle::random_matrix(1, 8, 8);
  std::copy_n(r.data().begin(), 8, x.row(0).begin());
  std::copy_n(r.data().begin(), 8, x.row(1).begin());
  const auto y = mhsa_ffn(x, w);
  for (std::size_t j = 0; j < 8; ++j) CHECK(y.at(0, j) == y.at(1, j));
}

TEST_CASE("mhsa_ffn matches the scalar oracle on 4 tokens") {
  for (bool pre_norm : {true, false}) {
    auto w = block_with_random_norms(16, 4, 11);
    w.pre_norm = pre_norm;
    const auto x = oracle::random_matrix(4, 16, 12, -2, 2);
    CHECK(max_diff(mhsa_ffn(x, w), oracle::mhsa_ffn(oracle::to_seq(x), w)) <= 1e-5);
  }
}

TEST_CASE("attention rows sum to one") {
  const auto w = block_with_random_norms(32, 4, 13);
  const auto x = oracle::random_matrix(64, 32, 14, -3, 3);
  const auto att = attention_weights(x, w);
  double worst = 0;
  for (const auto& h : att)
    for (std::size_t i = 0; i < h.rows(); ++i) {
      double s = 0;
      for (float v : h.row(i)) s += v;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("attention block is permutation equivariant") {
  const auto w = block_with_random_norms(16, 2, 15);
  const auto x = oracle::random_matrix(9, 16, 16);
  const std::size_t perm[9] = {4, 7, 0, 2, 8, 1, 3, 6, 5};
  PointMatrix xp(9, 16);
  for (std::size_t i = 0; i < 9; ++i) std::copy_n(x.row(perm[i]).begin(), 16, xp.row(i).begin());
  const auto y = mhsa_ffn(x, w);
  const auto yp = mhsa_ffn(xp, w);
  double worst = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 16; ++j) worst = std::max(worst, double(std::abs(yp.at(i, j) - y.at(perm[i], j))));
  CHECK(worst <= 1e-6);
}

TEST_CASE("patch pipeline without PE commutes with patch permutation") {
  // swapping two patches of the map swaps the corresponding tokens
  auto pe = PatchEmbedding::seeded(4, 4, 2, 2, 8, 17);
  pe.positional_encoding = false;
  const auto w = block_with_random_norms(8, 2, 18);
  const auto m = oracle::random_map(4, 4, 2, 19);
  FeatureMap swapped = m;
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 2; ++k) {
        swapped.at(r, c, k) = m.at(2 + r, 2 + c, k);
        swapped.at(2 + r, 2 + c, k) = m.at(r, c, k);
      }
  const auto y = mhsa_ffn(embed_patches(m, pe), w);
  const auto ys = mhsa_ffn(embed_patches(swapped, pe), w);
  const std::size_t perm[4] = {3, 1, 2, 0};
  double worst = 0;
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 8; ++j) worst = std::max(worst, double(std::abs(ys.at(t, j) - y.at(perm[t], j))));
  CHECK(worst <= 1e-6);
}

TEST_CASE("attention rejects heads that do not divide the dim") {
  CHECK_THROWS_AS(AttentionBlockWeights::seeded(10, 3, 8, 1), ConfigError);
}

TEST_CASE("tokens_to_grid layout") {
  PointMatrix seq(4, 2);
  for (std::size_t i = 0; i < 8; ++i) seq.data()[i] = float(i);
  const auto g = tokens_to_grid(seq, 2);
  CHECK(g.at(0, 1, 0) == 2.0f);
  CHECK(g.at(1, 0, 1) == 5.0f);
  CHECK_THROWS_AS(tokens_to_grid(PointMatrix(5, 2), 2), ConfigError);
}

TEST_CASE("upsample maps constants to constants") {
  const auto out = upsample_bilinear(FeatureMap(4, 4, 3, 3.0f), 37, 52, 2);
  double worst = 0;
  for (float v : out.data()) worst = std::max(worst, double(std::abs(v - 3.0f)));
  CHECK(worst <= 1e-6);
}

TEST_CASE("upsample 2x2 to 3x3 puts the corner mean at the center") {
  FeatureMap g(2, 2, 1);
  g.data()[0] = 0;
  g.data()[1] = 1;
  g.data()[2] = 2;
  g.data()[3] = 3;
  const auto out = upsample_bilinear(g, 3, 3);
  CHECK(out.at(1, 1, 0) == 1.5f);
  CHECK(out.at(0, 0, 0) == 0.0f);
  CHECK(out.at(2, 2, 0) == 3.0f);
  CHECK(out.at(0, 1, 0) == 0.5f);
}

TEST_CASE("upsample 2x2 to 4x4 matches the oracle") {
  const auto g = oracle::random_map(2, 2, 3, 20);
  const auto out = upsample_bilinear(g, 4, 4);
  const auto want = oracle::resize(std::vector<double>(g.data().begin(), g.data().end()), 2, 2, 3, 4, 4);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(out.data()[i] == doctest::Approx(want[i]).epsilon(1e-6));
  CHECK_THROWS_AS(upsample_bilinear(g, 1, 4), ConfigError);
}

TEST_CASE("enhance is an elementwise sum") {
  const auto m = oracle::random_map(6, 4, 2, 21);
  CHECK(enhance(m, FeatureMap(6, 4, 2)) == m);
  FeatureMap neg = m;
  for (float& v : neg.data()) v = -v;
  const auto z = enhance(m, neg);
  CHECK(std::all_of(z.data().begin(), z.data().end(), [](float v) { return v == 0.0f; }));
  const auto u = oracle::random_map(6, 4, 2, 22);
  const auto s = enhance(m, u);
  for (std::size_t i = 0; i < s.data().size(); ++i) CHECK(s.data()[i] == m.data()[i] + u.data()[i]);
  CHECK_THROWS_AS(enhance(m, FeatureMap(6, 4, 3)), ConfigError);
}

TEST_CASE("channel adapter applies per cell") {
  Rng rng(3);
  const auto a = Affine::seeded(3, 5, rng);
  const auto m = oracle::random_map(2, 3, 3, 23);
  const auto out = apply_channel_affine(m, a);
  CHECK(out.channels() == 5);
  const auto want = oracle::affine(a, {m.at(1, 2, 0), m.at(1, 2, 1), m.at(1, 2, 2)});
  for (std::size_t k = 0; k < 5; ++k) CHECK(out.at(1, 2, k) == doctest::Approx(want[k]).epsilon(1e-6));
}

TEST_CASE("conv2d matches the oracle and validates the kernel") {
  const auto conv = Conv2d::seeded(3, 4, 5, 24);
  const auto m = oracle::random_map(7, 9, 4, 25);
  const auto out = conv2d(m, conv, 3);
  const auto want = oracle::conv(std::vector<double>(m.data().begin(), m.data().end()), 7, 9, conv);
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(out.data()[i] - want[i]));
  CHECK(worst <= 1e-5);
  CHECK_THROWS_AS(conv2d(m, Conv2d(2, 4, 5)), ConfigError);
  CHECK_THROWS_AS(conv2d(oracle::random_map(7, 9, 3, 1), conv), ConfigError);
}

TEST_CASE("max_pool2 takes the block maximum") {
  FeatureMap m(2, 4, 1);
  const float vals[8] = {1, 5, -1, -2, 3, 2, -7, -3};
  std::copy(vals, vals + 8, m.data().begin());
  const auto p = max_pool2(m);
  CHECK(p.height() == 1);
  CHECK(p.width() == 2);
  CHECK(p.at(0, 0, 0) == 5.0f);
  CHECK(p.at(0, 1, 0) == -1.0f);
}

TEST_CASE("mini_cnn with zero weights outputs the head bias") {
  MiniCnnWeights w{Conv2d(3, 3, 4), Conv2d(3, 4, 4), Conv2d(1, 4, 2)};
  w.head.bias = {0.25f, -1.5f};
  const auto out = mini_cnn(oracle::random_map(8, 6, 3, 26), w);
  bool ok = out.height() == 8 && out.width() == 6 && out.channels() == 2;
  for (std::size_t cell = 0; cell < out.cells(); ++cell)
    ok = ok && out.cell(cell)[0] == 0.25f && out.cell(cell)[1] == -1.5f;
  CHECK(ok);
}

TEST_CASE("mini_cnn identity configuration reproduces the input") {
  const std::size_t c = 3;
  MiniCnnWeights w{Conv2d(3, c, c), Conv2d(3, c, c), Conv2d(1, c, c)};
  for (std::size_t k = 0; k < c; ++k) {
    w.down.w(1, 1, k, k) = 1.0f;
    w.head.w(0, 0, k, k) = 1.0f;
  }
  const auto m = oracle::random_map(8, 8, c, 27, 0.0, 2.0);
  CHECK(mini_cnn(m, w) == m);
}

TEST_CASE("mini_cnn matches the oracle on an 8x8 map") {
  const auto w = MiniCnnWeights::seeded(4, 6, 5, 28);
  const auto m = oracle::random_map(8, 8, 4, 29);
  const auto out = mini_cnn(m, w, 2);
  const auto want = oracle::mini_cnn(m, w);
  REQUIRE(out.data().size() == want.size());
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(out.data()[i] - want[i]));
  CHECK(worst <= 1e-5);
  CHECK_THROWS_AS(mini_cnn(oracle::random_map(7, 8, 4, 1), w), ConfigError);
}

TEST_CASE("classifier bias picks class 2 for zero features") {
  ClassifierWeights w{Affine(6, 4), Affine(4, 5)};
  w.output.bias[2] = 1.0f;
  const auto labels = argmax_labels(classify_points(PointMatrix(7, 6), w));
  CHECK(labels == std::vector<std::uint16_t>(7, 2));
}

TEST_CASE("classifier on one point with hand-set weights") {
  ClassifierWeights w{Affine(2, 2), Affine(2, 3)};
  // hidden = relu([x0 - x1, x0 + x1 - 4])
  w.hidden.weight = {1, -1, 1, 1};
  w.hidden.bias = {0, -4};
  // scores = [h0, h1, h0 + h1 + 0.5]
  w.output.weight = {1, 0, 0, 1, 1, 1};
  w.output.bias = {0, 0, 0.5f};
  PointMatrix x(1, 2);
  x.at(0, 0) = 3.0f;
  x.at(0, 1) = 2.0f;
  const auto s = classify_points(x, w);
  CHECK(s.at(0, 0) == 1.0f);
  CHECK(s.at(0, 1) == 1.0f);
  CHECK(s.at(0, 2) == 2.5f);
  CHECK(argmax_labels(s)[0] == 2);
}

TEST_CASE("classifier is permutation consistent and argmax breaks ties low") {
  const auto w = ClassifierWeights::seeded(6, 8, 4, 30);
  const auto x = oracle::random_matrix(5, 6, 31);
  PointMatrix xr(5, 6);
  for (std::size_t i = 0; i < 5; ++i) std::copy_n(x.row(4 - i).begin(), 6, xr.row(i).begin());
  const auto s = classify_points(x, w);
  const auto sr = classify_points(xr, w);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(sr.at(i, k) == s.at(4 - i, k));
  PointMatrix tie(1, 3, 1.0f);
  CHECK(argmax_labels(tie)[0] == 0);
}

TEST_CASE("backbone forward keeps the map shape and survives a bundle round trip") {
  BackboneConfig cfg;
  cfg.patches_per_side = 4;
  cfg.embed_dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 24;
  cfg.cnn_mid = 6;
  for (auto [h, w, c] : {std::tuple{16, 16, 4}, std::tuple{8, 24, 3}, std::tuple{12, 20, 5}}) {
    const auto net = BranchBackbone::seeded(h, w, c, cfg, 40);
    CHECK(net.blocks.size() == 2);
    const auto m = oracle::random_map(h, w, c, 41);
    const auto out = backbone_forward(m, net, 2);
    CHECK(out.same_shape(m));
    CHECK(std::all_of(out.data().begin(), out.data().end(), [](float v) { return std::isfinite(v); }));
    CHECK(out == backbone_forward(m, net, 1));

    TensorBundle bundle("backbone");
    net.to_bundle(bundle, "b");
    const auto back = BranchBackbone::from_bundle(bundle, "b", cfg);
    CHECK(backbone_forward(m, back) == out);
  }
}

TEST_CASE("adapting before upsampling equals adapting after") {
  const auto grid = oracle::random_map(3, 3, 4, 42);
  Rng rng(43);
  const auto a = Affine::seeded(4, 2, rng);
  const auto before = upsample_bilinear(apply_channel_affine(grid, a), 9, 7);
  const auto after = apply_channel_affine(upsample_bilinear(grid, 9, 7), a);
  double worst = 0;
  for (std::size_t i = 0; i < before.data().size(); ++i)
    worst = std::max(worst, double(std::abs(before.data()[i] - after.data()[i])));
  CHECK(worst <= 1e-5);
}
