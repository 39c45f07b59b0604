#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "pcbev/errors.hpp"
#include "pcbev/pipeline.hpp"

using namespace pcbev;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "schema": "pipeline_v1",
  "cartesian": {"x_min": -51.2, "x_max": 51.2, "y_min": -51.2, "y_max": 51.2, "width": 32, "height": 32},
  "polar": {"rho_min": 0.0, "rho_max": 51.2, "n_rho": 24, "n_phi": 32},
  "remap_mode": "bilinear",
  "stages": 2,
  "threads": 1,
  "seed": 77,
  "encoder_dims": [8, 16, 8],
  "backbone": {"patches_per_side": 4, "embed_dim": 16, "heads": 2, "ffn_dim": 32, "blocks": 2, "cnn_mid": 8},
  "classes": 6,
  "classifier_hidden": 12
})";

PipelineConfig small_config() { return PipelineConfig::from_json_text(kSmallConfig); }

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pcbev_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parses, keeps defaults and round trips") {
  const auto cfg = small_config();
  CHECK(cfg.cartesian.width == 32);
  CHECK(cfg.polar.n_phi == 32);
  CHECK(cfg.polar.azimuth == AzimuthConvention::kYX);
  CHECK(cfg.stages == 2);
  CHECK(cfg.channels() == 8);
  CHECK(cfg.backbone.pre_norm);
  const auto back = PipelineConfig::from_json_text(cfg.to_json_text());
  CHECK(back.to_json_text() == cfg.to_json_text());
  CHECK(back.backbone.embed_dim == 16);

  const auto defaults = PipelineConfig::from_json_text(R"({"schema": "pipeline_v1"})");
  CHECK(defaults.cartesian.width == 512);
  CHECK(defaults.polar.n_rho == 480);
  CHECK(defaults.polar.n_phi == 360);
  CHECK(defaults.remap_mode == RemapMode::kBilinear);
  CHECK(defaults.stages == 2);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"schema": "other"})"), FormatError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text("{not json"), FormatError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"schema": "pipeline_v1", "stages": -1})"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"schema": "pipeline_v1", "remap_mode": "cubic"})"),
                  ConfigError);
  auto cfg = small_config();
  cfg.encoder_weights = fs::temp_directory_path() / "pcbev_missing_weights.json";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::load(fs::temp_directory_path() / "pcbev_no_such_config.json"), IoError);
}

TEST_CASE("zero-weight classifier with a class-3 bias labels everything 3") {
  const auto cfg = small_config();
  auto weights = PipelineWeights::build(cfg);
  for (auto* a : {&weights.classifier.hidden, &weights.classifier.output}) {
    std::fill(a->weight.begin(), a->weight.end(), 0.0f);
    std::fill(a->bias.begin(), a->bias.end(), 0.0f);
  }
  weights.classifier.output.bias[3] = 1.0f;
  const auto result = run_pipeline(synth_scan(1, 2000), cfg, weights);
  CHECK(result.labels == std::vector<std::uint16_t>(2000, 3));
}

TEST_CASE("zero stages is two independent branches plus output fusion") {
  auto cfg = small_config();
  cfg.stages = 0;
  const auto weights = PipelineWeights::build(cfg);
  const auto cloud = synth_scan(2, 3000);
  const auto result = run_pipeline(cloud, cfg, weights);

  const auto f_cart = backbone_forward(project_to_bev(cloud, cfg.cartesian, weights.cart_encoder),
                                       weights.cart_backbone);
  const auto f_polar = backbone_forward(project_to_bev(cloud, cfg.polar, weights.polar_encoder),
                                        weights.polar_backbone);
  const auto p2c = build_remap_table(cfg.polar, cfg.cartesian, cfg.remap_mode);
  const auto scores =
      classify_points(fused_output_features(f_cart, f_polar, p2c, cfg.cartesian, cloud), weights.classifier);
  CHECK(result.scores == scores);
  CHECK(result.labels == argmax_labels(scores));
}

TEST_CASE("interaction stages change the result") {
  auto cfg = small_config();
  const auto cloud = synth_scan(3, 2000);
  const auto with = run_pipeline(cloud, cfg, PipelineWeights::build(cfg));
  cfg.stages = 0;
  const auto without = run_pipeline(cloud, cfg, PipelineWeights::build(cfg));
  CHECK(with.checksum != without.checksum);
}

TEST_CASE("fixed-seed run matches the recorded checksum") {
  const auto cfg = small_config();
  const auto result = run_pipeline(synth_scan(42, 5000), cfg, PipelineWeights::build(cfg));
  CHECK(result.labels.size() == 5000);
  CHECK(result.scores.dim() == 6);
  CHECK(result.checksum == 0x0427a6e3f8b8a520ULL);
}

TEST_CASE("pipeline output does not depend on the thread count") {
  auto cfg = small_config();
  const auto cloud = synth_scan(5, 8000);
  const auto weights = PipelineWeights::build(cfg);
  const auto one = run_pipeline(cloud, cfg, weights);
  cfg.threads = 4;
  const auto four = run_pipeline(cloud, cfg, weights);
  CHECK(one.checksum == four.checksum);
  CHECK(one.labels == four.labels);
  cfg.remap_mode = RemapMode::kNearest;
  cfg.threads = 1;
  const auto n1 = run_pipeline(cloud, cfg, weights);
  cfg.threads = 3;
  CHECK(run_pipeline(cloud, cfg, weights).checksum == n1.checksum);
}

TEST_CASE("saved weights load back through the config") {
  const auto dir = temp_dir("weights");
  auto cfg = small_config();
  const auto seeded = PipelineWeights::build(cfg);
  seeded.save(dir);
  for (const char* f : {"encoder.json", "backbone.json", "fusion.json", "classifier.json"}) CHECK(fs::exists(dir / f));

  std::string text = kSmallConfig;
  text.insert(text.rfind('}'), R"(, "seed": 999, "weights": {"encoder": "encoder.json", "backbone": "backbone.json",
      "fusion": "fusion.json", "classifier": "classifier.json"})");
  {
    std::ofstream(dir / "config.json") << text;
  }
  const auto loaded_cfg = PipelineConfig::load(dir / "config.json");
  CHECK(loaded_cfg.seed == 999);
  REQUIRE(loaded_cfg.encoder_weights.has_value());
  CHECK(*loaded_cfg.encoder_weights == dir / "encoder.json");
  const auto cloud = synth_scan(6, 1500);
  CHECK(run_pipeline(cloud, loaded_cfg, PipelineWeights::build(loaded_cfg)).checksum ==
        run_pipeline(cloud, cfg, seeded).checksum);
}

TEST_CASE("errors name the failing stage") {
  auto cfg = small_config();
  auto weights = PipelineWeights::build(cfg);
  weights.cart_fusion[1] = FusionWeights::seeded(4, 1);
  try {
    run_pipeline(synth_scan(7, 500), cfg, weights);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("pipeline stage 'interaction 1'") != std::string::npos);
  }

  weights = PipelineWeights::build(cfg);
  weights.classifier = ClassifierWeights::seeded(10, 4, 3, 1);
  try {
    run_pipeline(synth_scan(7, 500), cfg, weights);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("pipeline stage 'classifier'") != std::string::npos);
  }

  weights = PipelineWeights::build(cfg);
  weights.polar_encoder = PillarEncoderWeights::seeded(1, {8, 5});
  try {
    run_pipeline(synth_scan(7, 500), cfg, weights);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("pipeline stage '") != std::string::npos);
  }
}

TEST_CASE("empty scan runs and yields no labels") {
  const auto cfg = small_config();
  const auto result = run_pipeline(PointCloud{}, cfg, PipelineWeights::build(cfg));
  CHECK(result.labels.empty());
  CHECK(result.cart_coverage.occupied_cells == 0);
}

TEST_CASE("uint16 label files") {
  const auto path = temp_dir("labels") / "l.bin";
  const std::vector<std::uint16_t> labels{0, 1, 0x1234, 65535};
  write_labels_u16(path, labels);
  CHECK(fs::file_size(path) == 8);
  std::ifstream f(path, std::ios::binary);
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  CHECK(b[4] == 0x34);
  CHECK(b[5] == 0x12);
  CHECK(read_labels_u16(path) == labels);
}
