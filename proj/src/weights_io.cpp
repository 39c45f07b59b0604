#include "pcbev/weights_io.hpp"

#include <fstream>
#include <numeric>

#include <json.hpp>

#include "binary_io.hpp"
#include "pcbev/errors.hpp"

namespace pcbev {

namespace {

constexpr const char* kSchema = "pcbev_weights_v1";

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

void TensorBundle::add(const std::string& name, std::vector<std::size_t> shape,
                       std::span<const float> values) {
  if (element_count(shape) != values.size()) {
    throw ConfigError("tensor " + name + " has " + std::to_string(values.size()) +
                      " values for shape " + shape_text(shape));
  }
  if (!contains(name)) order_.push_back(name);
  tensors_[name] = Tensor{std::move(shape), {values.begin(), values.end()}};
}

const Tensor& TensorBundle::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("weights: missing tensor " + name);
  return it->second;
}

const Tensor& TensorBundle::get(const std::string& name,
                                const std::vector<std::size_t>& expected_shape) const {
  const Tensor& t = get(name);
  if (t.shape != expected_shape) {
    throw ConfigError("weights: tensor " + name + " has shape " + shape_text(t.shape) +
                      ", expected " + shape_text(expected_shape));
  }
  return t;
}

void TensorBundle::save(const std::filesystem::path& manifest) const {
  auto blob_path = manifest;
  blob_path.replace_extension(".bin");
  nlohmann::ordered_json doc;
  doc["schema"] = kSchema;
  doc["kind"] = kind_;
  doc["blob"] = blob_path.filename().string();
  doc["tensors"] = nlohmann::ordered_json::array();
  detail::Bytes blob;
  std::size_t offset = 0;
  for (const auto& name : order_) {
    const Tensor& t = tensors_.at(name);
    doc["tensors"].push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    for (float v : t.values) detail::put_f32(blob, v);
    offset += t.values.size();
  }
  detail::write_file(blob_path, blob);
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

TensorBundle TensorBundle::load(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (doc.value("schema", "") != kSchema) {
    throw FormatError(manifest.string() + ": expected schema " + kSchema);
  }
  TensorBundle bundle(doc.value("kind", "generic"));
  const auto blob = detail::read_file(manifest.parent_path() / doc.at("blob").get<std::string>());
  if (blob.size() % 4 != 0) throw FormatError("weight blob size is not a multiple of 4");
  const std::size_t total = blob.size() / 4;
  for (const auto& entry : doc.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = element_count(shape);
    if (offset + count > total) throw FormatError("tensor " + name + " runs past the blob");
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = detail::get_f32(blob, 4 * (offset + i));
    bundle.add(name, std::move(shape), values);
  }
  return bundle;
}

void TensorBundle::put_affine(const std::string& prefix, const Affine& layer) {
  add(prefix + ".weight", {layer.out, layer.in}, layer.weight);
  add(prefix + ".bias", {layer.out}, layer.bias);
}

Affine TensorBundle::get_affine(const std::string& prefix) const {
  const Tensor& w = get(prefix + ".weight");
  if (w.shape.size() != 2) throw ConfigError("weights: " + prefix + ".weight must be 2-D");
  Affine layer(w.shape[1], w.shape[0]);
  layer.weight = w.values;
  layer.bias = get(prefix + ".bias", {layer.out}).values;
  return layer;
}

void TensorBundle::put_layer_norm(const std::string& prefix, const LayerNorm& norm) {
  add(prefix + ".gamma", {norm.gamma.size()}, norm.gamma);
  add(prefix + ".beta", {norm.beta.size()}, norm.beta);
}

LayerNorm TensorBundle::get_layer_norm(const std::string& prefix) const {
  LayerNorm norm;
  norm.gamma = get(prefix + ".gamma").values;
  norm.beta = get(prefix + ".beta", {norm.gamma.size()}).values;
  return norm;
}

}  // namespace pcbev
