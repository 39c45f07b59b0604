#include "pcbev/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "pcbev/checksum.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/rng.hpp"
#include "pcbev/weights_io.hpp"

namespace pcbev {

using nlohmann::json;
using nlohmann::ordered_json;

void PipelineConfig::validate() const {
  cartesian.validate();
  polar.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (encoder_dims.size() < 2 || encoder_dims.front() != kPointFeatureDim) {
    throw ConfigError("encoder dims must start at " + std::to_string(kPointFeatureDim) +
                      " and have at least one layer");
  }
  if (classes == 0 || classes > 65536) throw ConfigError("classes must be in [1, 65536]");
  for (const auto* path : {&encoder_weights, &backbone_weights, &fusion_weights, &classifier_weights}) {
    if (*path && !std::filesystem::exists(**path)) {
      throw ConfigError("weight file " + (*path)->string() + " does not exist");
    }
  }
}

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, const std::filesystem::path& base,
               std::optional<std::filesystem::path>& target) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  std::filesystem::path p = j.at(key).get<std::string>();
  target = p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text,
                                              const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
  if (doc.value("schema", std::string{}) != kPipelineSchema) {
    throw FormatError(std::string("pipeline config: expected schema ") + kPipelineSchema);
  }
  PipelineConfig cfg;
  try {
    if (doc.contains("cartesian")) {
      const auto& c = doc.at("cartesian");
      read_if(c, "x_min", cfg.cartesian.x_min);
      read_if(c, "x_max", cfg.cartesian.x_max);
      read_if(c, "y_min", cfg.cartesian.y_min);
      read_if(c, "y_max", cfg.cartesian.y_max);
      read_if(c, "width", cfg.cartesian.width);
      read_if(c, "height", cfg.cartesian.height);
    }
    if (doc.contains("polar")) {
      const auto& p = doc.at("polar");
      read_if(p, "rho_min", cfg.polar.rho_min);
      read_if(p, "rho_max", cfg.polar.rho_max);
      read_if(p, "n_rho", cfg.polar.n_rho);
      read_if(p, "n_phi", cfg.polar.n_phi);
      if (p.contains("azimuth")) {
        const auto conv = parse_azimuth(p.at("azimuth").get<std::string>());
        if (!conv) throw ConfigError("unknown azimuth convention");
        cfg.polar.azimuth = *conv;
      }
    }
    if (doc.contains("remap_mode")) {
      const auto mode = parse_remap_mode(doc.at("remap_mode").get<std::string>());
      if (!mode) throw ConfigError("unknown remap_mode");
      cfg.remap_mode = *mode;
    }
    if (doc.contains("stages") && doc.at("stages").get<long long>() < 0) {
      throw ConfigError("stages must be >= 0");
    }
    read_if(doc, "stages", cfg.stages);
    read_if(doc, "threads", cfg.threads);
    read_if(doc, "seed", cfg.seed);
    read_if(doc, "encoder_dims", cfg.encoder_dims);
    read_if(doc, "classes", cfg.classes);
    read_if(doc, "classifier_hidden", cfg.classifier_hidden);
    if (doc.contains("backbone")) {
      const auto& b = doc.at("backbone");
      read_if(b, "patches_per_side", cfg.backbone.patches_per_side);
      read_if(b, "embed_dim", cfg.backbone.embed_dim);
      read_if(b, "heads", cfg.backbone.heads);
      read_if(b, "ffn_dim", cfg.backbone.ffn_dim);
      read_if(b, "blocks", cfg.backbone.blocks);
      read_if(b, "cnn_mid", cfg.backbone.cnn_mid);
      read_if(b, "pre_norm", cfg.backbone.pre_norm);
      read_if(b, "positional_encoding", cfg.backbone.positional_encoding);
    }
    if (doc.contains("weights")) {
      const auto& w = doc.at("weights");
      read_path(w, "encoder", base_dir, cfg.encoder_weights);
      read_path(w, "backbone", base_dir, cfg.backbone_weights);
      read_path(w, "fusion", base_dir, cfg.fusion_weights);
      read_path(w, "classifier", base_dir, cfg.classifier_weights);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return from_json_text(text.str(), path.parent_path());
}

std::string PipelineConfig::to_json_text() const {
  ordered_json doc;
  doc["schema"] = kPipelineSchema;
  doc["cartesian"] = {{"x_min", cartesian.x_min}, {"x_max", cartesian.x_max},
                      {"y_min", cartesian.y_min}, {"y_max", cartesian.y_max},
                      {"width", cartesian.width}, {"height", cartesian.height}};
  doc["polar"] = {{"rho_min", polar.rho_min}, {"rho_max", polar.rho_max},
                  {"n_rho", polar.n_rho},     {"n_phi", polar.n_phi},
                  {"azimuth", std::string(to_string(polar.azimuth))}};
  doc["remap_mode"] = std::string(to_string(remap_mode));
  doc["stages"] = stages;
  doc["threads"] = threads;
  doc["seed"] = seed;
  doc["encoder_dims"] = encoder_dims;
  doc["backbone"] = {{"patches_per_side", backbone.patches_per_side},
                     {"embed_dim", backbone.embed_dim},
                     {"heads", backbone.heads},
                     {"ffn_dim", backbone.ffn_dim},
                     {"blocks", backbone.blocks},
                     {"cnn_mid", backbone.cnn_mid},
                     {"pre_norm", backbone.pre_norm},
                     {"positional_encoding", backbone.positional_encoding}};
  doc["classes"] = classes;
  doc["classifier_hidden"] = classifier_hidden;
  ordered_json weights = ordered_json::object();
  auto put = [&](const char* key, const std::optional<std::filesystem::path>& p) {
    weights[key] = p ? ordered_json(p->string()) : ordered_json(nullptr);
  };
  put("encoder", encoder_weights);
  put("backbone", backbone_weights);
  put("fusion", fusion_weights);
  put("classifier", classifier_weights);
  doc["weights"] = weights;
  return doc.dump(2);
}

PipelineWeights PipelineWeights::build(const PipelineConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels();
  Rng seeds(cfg.seed);
  const std::uint64_t cart_encoder_seed = seeds.bits();
  const std::uint64_t polar_encoder_seed = seeds.bits();
  const std::uint64_t cart_backbone_seed = seeds.bits();
  const std::uint64_t polar_backbone_seed = seeds.bits();
  const std::uint64_t classifier_seed = seeds.bits();
  const std::uint64_t fusion_seed = seeds.bits();

  PipelineWeights w;
  if (cfg.encoder_weights) {
    const auto bundle = TensorBundle::load(*cfg.encoder_weights);
    w.cart_encoder = PillarEncoderWeights::from_bundle(bundle, "cart.");
    w.polar_encoder = PillarEncoderWeights::from_bundle(bundle, "polar.");
  } else {
    w.cart_encoder = PillarEncoderWeights::seeded(cart_encoder_seed, cfg.encoder_dims);
    w.polar_encoder = PillarEncoderWeights::seeded(polar_encoder_seed, cfg.encoder_dims);
  }

  if (cfg.fusion_weights) {
    const auto bundle = TensorBundle::load(*cfg.fusion_weights);
    for (std::size_t s = 0; s < cfg.stages; ++s) {
      w.cart_fusion.push_back(FusionWeights::from_bundle(bundle, "stage" + std::to_string(s) + ".cart"));
      w.polar_fusion.push_back(FusionWeights::from_bundle(bundle, "stage" + std::to_string(s) + ".polar"));
    }
  } else {
    Rng fusion(fusion_seed);
    for (std::size_t s = 0; s < cfg.stages; ++s) {
      w.cart_fusion.push_back(FusionWeights::seeded(c, fusion.bits()));
      w.polar_fusion.push_back(FusionWeights::seeded(c, fusion.bits()));
    }
  }

  if (cfg.backbone_weights) {
    const auto bundle = TensorBundle::load(*cfg.backbone_weights);
    w.cart_backbone = BranchBackbone::from_bundle(bundle, "cart.", cfg.backbone);
    w.polar_backbone = BranchBackbone::from_bundle(bundle, "polar.", cfg.backbone);
  } else {
    w.cart_backbone = BranchBackbone::seeded(cfg.cartesian.rows(), cfg.cartesian.cols(), c,
                                             cfg.backbone, cart_backbone_seed);
    w.polar_backbone = BranchBackbone::seeded(cfg.polar.rows(), cfg.polar.cols(), c, cfg.backbone,
                                              polar_backbone_seed);
  }

  if (cfg.classifier_weights) {
    const auto bundle = TensorBundle::load(*cfg.classifier_weights);
    w.classifier = {bundle.get_affine("hidden"), bundle.get_affine("output")};
    w.classifier.validate();
  } else {
    w.classifier = ClassifierWeights::seeded(2 * c, cfg.classifier_hidden, cfg.classes, classifier_seed);
  }
  return w;
}

void PipelineWeights::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  TensorBundle encoders("pillar_encoder");
  cart_encoder.to_bundle(encoders, "cart.");
  polar_encoder.to_bundle(encoders, "polar.");
  encoders.save(dir / "encoder.json");

  TensorBundle backbones("backbone");
  cart_backbone.to_bundle(backbones, "cart.");
  polar_backbone.to_bundle(backbones, "polar.");
  backbones.save(dir / "backbone.json");

  TensorBundle fusion("fusion");
  for (std::size_t s = 0; s < cart_fusion.size(); ++s) {
    cart_fusion[s].to_bundle(fusion, "stage" + std::to_string(s) + ".cart");
    polar_fusion[s].to_bundle(fusion, "stage" + std::to_string(s) + ".polar");
  }
  fusion.save(dir / "fusion.json");

  TensorBundle cls("classifier");
  cls.put_affine("hidden", classifier.hidden);
  cls.put_affine("output", classifier.output);
  cls.save(dir / "classifier.json");
}

namespace {

template <typename Fn>
auto in_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("pipeline stage '" + name + "': " + e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const PointCloud& cloud, const PipelineConfig& cfg,
                            const PipelineWeights& weights) {
  in_stage("config", [&] { cfg.validate(); });
  if (weights.cart_fusion.size() < cfg.stages || weights.polar_fusion.size() < cfg.stages) {
    throw ConfigError("pipeline stage 'interaction': fewer fusion weights than stages");
  }
  const int threads = cfg.threads;
  const GridSpec cart_grid = cfg.cartesian;
  const GridSpec polar_grid = cfg.polar;
  PipelineResult result;

  FeatureMap f_cart = in_stage("encode cartesian", [&] {
    const auto assignment = assign_cells(cloud, cart_grid, threads);
    result.cart_coverage = coverage_stats(assignment, assignment.height, assignment.width);
    const auto encoded = pillar_encode(point_input_features(cloud, assignment, cart_grid),
                                       weights.cart_encoder, threads);
    return scatter_max(encoded, assignment, assignment.height, assignment.width, threads);
  });
  FeatureMap f_polar = in_stage("encode polar", [&] {
    const auto assignment = assign_cells(cloud, polar_grid, threads);
    result.polar_coverage = coverage_stats(assignment, assignment.height, assignment.width);
    const auto encoded = pillar_encode(point_input_features(cloud, assignment, polar_grid),
                                       weights.polar_encoder, threads);
    return scatter_max(encoded, assignment, assignment.height, assignment.width, threads);
  });

  const RemapTable polar_to_cart = in_stage("remap tables", [&] {
    return build_remap_table(polar_grid, cart_grid, cfg.remap_mode, threads);
  });
  RemapTable cart_to_polar;
  if (cfg.stages > 0) {
    cart_to_polar = in_stage("remap tables", [&] {
      return build_remap_table(cart_grid, polar_grid, cfg.remap_mode, threads);
    });
  }

  for (std::size_t s = 0; s < cfg.stages; ++s) {
    in_stage("interaction " + std::to_string(s), [&] {
      const FeatureMap cart_hat = apply_remap(polar_to_cart, f_polar, threads);
      const FeatureMap polar_hat = apply_remap(cart_to_polar, f_cart, threads);
      FeatureMap next_cart = fuse_concat_affine(cart_hat, f_cart, weights.cart_fusion[s], threads);
      FeatureMap next_polar = fuse_concat_affine(polar_hat, f_polar, weights.polar_fusion[s], threads);
      f_cart = std::move(next_cart);
      f_polar = std::move(next_polar);
    });
  }

  f_cart = in_stage("backbone cartesian",
                    [&] { return backbone_forward(f_cart, weights.cart_backbone, threads); });
  f_polar = in_stage("backbone polar",
                     [&] { return backbone_forward(f_polar, weights.polar_backbone, threads); });

  const PointMatrix features = in_stage("output fusion", [&] {
    return fused_output_features(f_cart, f_polar, polar_to_cart, cfg.cartesian, cloud, threads);
  });
  result.scores = in_stage("classifier", [&] {
    return classify_points(features, weights.classifier, threads);
  });
  result.labels = argmax_labels(result.scores);

  detail::Bytes label_bytes;
  label_bytes.reserve(2 * result.labels.size());
  for (auto l : result.labels) {
    label_bytes.push_back(static_cast<unsigned char>(l & 0xffu));
    label_bytes.push_back(static_cast<unsigned char>(l >> 8));
  }
  result.checksum = fnv1a64_bytes(label_bytes, fnv1a64(result.scores.data()));
  return result;
}

void write_labels_u16(const std::filesystem::path& path, const std::vector<std::uint16_t>& labels) {
  detail::Bytes out;
  out.reserve(2 * labels.size());
  for (auto l : labels) {
    out.push_back(static_cast<unsigned char>(l & 0xffu));
    out.push_back(static_cast<unsigned char>(l >> 8));
  }
  detail::write_file(path, out);
}

std::vector<std::uint16_t> read_labels_u16(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() % 2) throw FormatError(path.string() + ": odd byte count for uint16 labels");
  std::vector<std::uint16_t> labels(bytes.size() / 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  return labels;
}

}  // namespace pcbev
