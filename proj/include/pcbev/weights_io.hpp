#pragma once

// Weight files: a JSON manifest naming each tensor's shape and offset into a
// raw little-endian float32 blob stored next to it.
//
//   {"schema": "pcbev_weights_v1", "kind": "...", "blob": "enc.bin",
//    "tensors": [{"name": "layer0.weight", "shape": [32, 8], "offset": 0}, ...]}
//
// Offsets count floats, not bytes.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pcbev/linalg.hpp"

namespace pcbev {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

class TensorBundle {
public:
  explicit TensorBundle(std::string kind = "generic") : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  void add(const std::string& name, std::vector<std::size_t> shape, std::span<const float> values);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws ConfigError if missing or if the shape differs from `expected_shape`.
  const Tensor& get(const std::string& name, const std::vector<std::size_t>& expected_shape) const;
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return order_.size(); }

  /// Writes the manifest and `<stem>.bin` in the same directory.
  void save(const std::filesystem::path& manifest) const;
  static TensorBundle load(const std::filesystem::path& manifest);

  void put_affine(const std::string& prefix, const Affine& layer);
  Affine get_affine(const std::string& prefix) const;
  void put_layer_norm(const std::string& prefix, const LayerNorm& norm);
  LayerNorm get_layer_norm(const std::string& prefix) const;

private:
  std::string kind_;
  std::vector<std::string> order_;
  std::map<std::string, Tensor> tensors_;
};

}  // namespace pcbev
