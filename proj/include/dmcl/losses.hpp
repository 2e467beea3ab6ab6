#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dmcl/numerics.hpp"

namespace dmcl {

enum class PairLabel : int { Dissimilar = 0, Similar = 1 };

inline double label_value(PairLabel y) { return y == PairLabel::Similar ? 1.0 : 0.0; }

/// Margins of the double-margin contrastive loss. Positive pairs closer than
/// `positive` and negative pairs farther than `negative` incur no loss.
struct MarginConfig {
  double positive = 0.8;
  double negative = 1.2;

  /// Throws BadSpec unless 0 <= positive < negative <= 2.
  void validate() const;

  /// Tuned preset: (0.8, 1.2).
  static MarginConfig preset() { return {0.8, 1.2}; }

  friend bool operator==(const MarginConfig&, const MarginConfig&) = default;
};

struct ClassWeights {
  Vec values;
};

/// Loss value with its derivative w.r.t. the pair distance.
struct LossValue {
  double loss = 0.0;
  double grad = 0.0;
};

/// 1/2 [y d^2 + (1 - y) max(alpha - d, 0)^2]
LossValue single_margin_loss(double d, PairLabel y, double alpha);

/// 1/2 [y max(d - a1, 0)^2 + (1 - y) max(a2 - d, 0)^2]
LossValue double_margin_loss(double d, PairLabel y, const MarginConfig& m);

struct TripletValue {
  double loss = 0.0;
  double grad_ap = 0.0;
  double grad_an = 0.0;
};

/// 1/2 max(d_ap^2 - d_an^2 + margin, 0)
TripletValue triplet_loss(double d_ap, double d_an, double margin);

/// Default triplet margin on squared distances.
inline constexpr double kDefaultTripletMargin = 0.1;

struct CrossEntropyValue {
  double loss = 0.0;
  Vec grad;  // dLoss/dlogits
};

/// w[target] * -log softmax(logits)[target], stabilized by max subtraction.
CrossEntropyValue weighted_cross_entropy(ConstSpan logits, std::size_t target,
                                         const ClassWeights& w);

/// w[k] = (sum(counts) / K) / counts[k]
ClassWeights class_weights_from_counts(std::span<const std::size_t> counts);

/// Euclidean distance and its gradient w.r.t. the first argument; the gradient
/// w.r.t. the second argument is the negation. Pairs closer than 1e-9 get a
/// zero gradient.
struct DistanceWithGrad {
  double distance = 0.0;
  Vec grad_first;
};

DistanceWithGrad distance_with_grad(ConstSpan a, ConstSpan b);

}  // namespace dmcl
