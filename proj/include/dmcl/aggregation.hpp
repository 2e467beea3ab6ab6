#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dmcl/numerics.hpp"
#include "dmcl/pca.hpp"

namespace dmcl {

/// H x W grid of C-channel local descriptors stored in (h, w, c) order.
/// Values are non-negative and finite (post-ReLU activations).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  /// Validates shape and value constraints.
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t locations() const noexcept { return height_ * width_; }

  double at(std::size_t h, std::size_t w, std::size_t c) const {
    return values_[(h * width_ + w) * channels_ + c];
  }
  std::span<const double> location(std::size_t l) const {
    return {values_.data() + l * channels_, channels_};
  }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Sub-window [top, top + h) x [left, left + w).
  FeatureMap crop(std::size_t top, std::size_t left, std::size_t h, std::size_t w) const;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Gradient w.r.t. a FeatureMap; same layout, no sign constraint.
struct FeatureMapGrad {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double at(std::size_t h, std::size_t w, std::size_t c) const {
    return values[(h * width + w) * channels + c];
  }
};

/// Channelwise global max pooling. Not normalized.
Vec mac(const FeatureMap& fm);

/// Row-major location index of each channel's maximum; first occurrence wins ties.
std::vector<std::size_t> mac_argmax(const FeatureMap& fm);

/// Channelwise global sum pooling. Not normalized.
Vec spoc(const FeatureMap& fm);

/// Routes upstream[c] to the argmax location of channel c.
FeatureMapGrad mac_backward(const FeatureMap& fm, ConstSpan upstream);

/// l2 -> optional PCA -> l2.
struct PostProcessPipeline {
  std::optional<PcaModel> pca;

  std::size_t target_dim(std::size_t input_dim) const {
    return pca ? pca->out_dim() : input_dim;
  }
};

Vec postprocess(const PostProcessPipeline& pipeline, ConstSpan raw);

}  // namespace dmcl
