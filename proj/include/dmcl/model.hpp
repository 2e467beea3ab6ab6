#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dmcl/aggregation.hpp"
#include "dmcl/numerics.hpp"
#include "dmcl/rng.hpp"

namespace dmcl {

/// Per-location affine map (a 1x1 convolution): z = W a + b, W is out x in.
struct AffineLayer {
  Mat weight;
  Vec bias;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

/// Linear classifier on the raw pooled vector: logits = W pooled + b, W is K x D.
struct ClassifierHead {
  Mat weight;
  Vec bias;

  std::size_t classes() const noexcept { return weight.rows(); }
  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

/// Trainable state: an affine+ReLU stack, MAC pooling, l2 normalization, and an
/// optional classification head used only during the classification stage.
struct ModelParams {
  std::vector<AffineLayer> layers;
  std::optional<ClassifierHead> head;

  std::size_t input_channels() const { return layers.front().in_dim(); }
  std::size_t embedding_dim() const { return layers.back().out_dim(); }
  /// [C_in, C_1, ..., C_last]
  std::vector<std::size_t> layer_dims() const;
  std::size_t parameter_count() const;

  /// Views of every tensor in a fixed order: per layer (weight, bias), then head (weight, bias).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  /// Checks dimension chaining and finiteness; throws BadSpec / NonFiniteValue.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients share the parameter layout.
using ParamGradients = ModelParams;

ModelParams zeros_like(const ModelParams& p);
/// y += a * x, tensor by tensor.
void add_scaled(ModelParams& y, double a, const ModelParams& x);
void scale(ModelParams& p, double a);
bool same_layout(const ModelParams& a, const ModelParams& b);

Vec flatten(const ModelParams& p);
void unflatten(std::span<const double> flat, ModelParams& into);

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero biases. `dims` is
/// [C_in, C_1, ..., C_last]; a head over `classes` outputs is added when given.
ModelParams init_params(std::span<const std::size_t> dims, Rng& rng,
                        std::optional<std::size_t> classes = std::nullopt);

ModelParams without_head(ModelParams p);

/// Everything the backward pass needs from one forward call.
struct ForwardTrace {
  std::size_t locations = 0;
  Mat input;                       // locations x C_in
  std::vector<Mat> pre;            // per layer, locations x C_l
  std::vector<Mat> act;            // per layer, relu(pre)
  std::vector<std::size_t> argmax; // per output channel, row-major location index
  Vec pooled;                      // raw MAC vector
  double pooled_norm = 0.0;
  Vec embedding;                   // pooled / pooled_norm (empty if pooled is zero)
};

/// Runs the affine+ReLU stack at every location and MAC-pools. Does not
/// normalize and never throws ZeroVector.
ForwardTrace forward_trace(const ModelParams& p, const FeatureMap& fm);

struct Embedded {
  Vec embedding;
  ForwardTrace trace;
};

/// Unit-norm embedding. Throws ZeroVector when every pooled channel is zero.
Embedded forward_embed(const ModelParams& p, const FeatureMap& fm);

/// head.weight * pooled + head.bias on the raw (unnormalized) pooled vector.
Vec forward_classify(const ModelParams& p, const FeatureMap& fm, ForwardTrace* trace = nullptr);

/// Accumulates dLoss/dparams into `grads` given dLoss/dembedding.
void backward_embedding(const ModelParams& p, const ForwardTrace& trace, ConstSpan d_embedding,
                        ParamGradients& grads);

/// Accumulates dLoss/dparams (head included) into `grads` given dLoss/dlogits.
void backward_logits(const ModelParams& p, const ForwardTrace& trace, ConstSpan d_logits,
                     ParamGradients& grads);

/// Accumulates dLoss/dparams of the layer stack given dLoss/dpooled.
void backward_pooled(const ModelParams& p, const ForwardTrace& trace, ConstSpan d_pooled,
                     ParamGradients& grads);

}  // namespace dmcl
