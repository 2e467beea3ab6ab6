#include "dmcl/aggregation.hpp"

#include <cmath>

#include "dmcl/error.hpp"

namespace dmcl {

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : FeatureMap(height, width, channels, std::vector<double>(height * width * channels, fill)) {}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
                       std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  require(height_ >= 1 && width_ >= 1, ErrorCode::EmptyMap, "feature map has no locations");
  require(channels_ >= 1, ErrorCode::BadSpec, "feature map needs at least one channel");
  require(values_.size() == height_ * width_ * channels_, ErrorCode::ShapeMismatch,
          "feature map value count does not match H*W*C");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, ErrorCode::NonFiniteValue,
            "feature map values must be finite and non-negative");
}

FeatureMap FeatureMap::crop(std::size_t top, std::size_t left, std::size_t h, std::size_t w) const {
  require(h >= 1 && w >= 1 && top + h <= height_ && left + w <= width_, ErrorCode::ShapeMismatch,
          "crop window outside feature map");
  std::vector<double> out;
  out.reserve(h * w * channels_);
  for (std::size_t r = top; r < top + h; ++r) {
    const auto begin = values_.begin() + static_cast<std::ptrdiff_t>((r * width_ + left) * channels_);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(w * channels_));
  }
  return FeatureMap(h, w, channels_, std::move(out));
}

Vec mac(const FeatureMap& fm) {
  require(fm.locations() >= 1, ErrorCode::EmptyMap, "mac of empty map");
  Vec out(fm.location(0).begin(), fm.location(0).end());
  for (std::size_t l = 1; l < fm.locations(); ++l) {
    const auto loc = fm.location(l);
    for (std::size_t c = 0; c < out.size(); ++c)
      if (loc[c] > out[c]) out[c] = loc[c];
  }
  return out;
}

std::vector<std::size_t> mac_argmax(const FeatureMap& fm) {
  require(fm.locations() >= 1, ErrorCode::EmptyMap, "mac of empty map");
  std::vector<std::size_t> arg(fm.channels(), 0);
  Vec best(fm.location(0).begin(), fm.location(0).end());
  for (std::size_t l = 1; l < fm.locations(); ++l) {
    const auto loc = fm.location(l);
    for (std::size_t c = 0; c < best.size(); ++c) {
      if (loc[c] > best[c]) {
        best[c] = loc[c];
        arg[c] = l;
      }
    }
  }
  return arg;
}

Vec spoc(const FeatureMap& fm) {
  require(fm.locations() >= 1, ErrorCode::EmptyMap, "spoc of empty map");
  Vec out(fm.channels(), 0.0);
  for (std::size_t l = 0; l < fm.locations(); ++l) axpy(1.0, fm.location(l), out);
  return out;
}

FeatureMapGrad mac_backward(const FeatureMap& fm, ConstSpan upstream) {
  require(upstream.size() == fm.channels(), ErrorCode::DimMismatch,
          "mac_backward upstream dim " + std::to_string(upstream.size()) + " != channels " +
              std::to_string(fm.channels()));
  FeatureMapGrad grad{fm.height(), fm.width(), fm.channels(),
                      std::vector<double>(fm.values().size(), 0.0)};
  const auto arg = mac_argmax(fm);
  for (std::size_t c = 0; c < arg.size(); ++c) grad.values[arg[c] * fm.channels() + c] = upstream[c];
  return grad;
}

Vec postprocess(const PostProcessPipeline& pipeline, ConstSpan raw) {
  Vec v = l2_normalize(raw);
  if (!pipeline.pca) return v;
  return l2_normalize(pca_apply(*pipeline.pca, v));
}

}  // namespace dmcl
