#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pcbev {

/// Dense H x W x C float map, row-major with channels innermost.
class FeatureMap {
public:
  FeatureMap() = default;
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
      : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t cells() const { return height_ * width_; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::span<float> cell(std::size_t flat) { return {data_.data() + flat * channels_, channels_}; }
  std::span<const float> cell(std::size_t flat) const {
    return {data_.data() + flat * channels_, channels_};
  }
  std::span<float> cell(std::size_t row, std::size_t col) { return cell(row * width_ + col); }
  std::span<const float> cell(std::size_t row, std::size_t col) const {
    return cell(row * width_ + col);
  }

  float& at(std::size_t row, std::size_t col, std::size_t ch) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  float at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  bool same_shape(const FeatureMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

/// "BFM1" magic, uint32 H, W, C, then H*W*C float32, all little-endian.
std::vector<unsigned char> encode_feature_map(const FeatureMap& map);
FeatureMap decode_feature_map(std::span<const unsigned char> bytes);
void write_feature_map(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap read_feature_map(const std::filesystem::path& path);

/// Channel-wise concatenation of two maps with equal H and W.
FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);

std::uint64_t checksum(const FeatureMap& map);

}  // namespace pcbev
