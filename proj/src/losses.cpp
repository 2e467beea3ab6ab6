#include "dmcl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dmcl/error.hpp"

namespace dmcl {

void MarginConfig::validate() const {
  require(std::isfinite(positive) && std::isfinite(negative) && positive >= 0.0 &&
              positive < negative && negative <= 2.0,
          ErrorCode::BadSpec,
          "margins must satisfy 0 <= positive < negative <= 2, got (" + std::to_string(positive) +
              ", " + std::to_string(negative) + ")");
}

namespace {

void check_distance(double d) {
  require(d >= 0.0, ErrorCode::NegativeDistance, "distance " + std::to_string(d) + " is negative");
}

}  // namespace

LossValue single_margin_loss(double d, PairLabel y, double alpha) {
  check_distance(d);
  require(alpha > 0.0, ErrorCode::BadSpec, "margin must be positive");
  if (y == PairLabel::Similar) return {0.5 * d * d, d};
  const double gap = alpha - d;
  if (gap <= 0.0) return {0.0, 0.0};
  return {0.5 * gap * gap, -gap};
}

LossValue double_margin_loss(double d, PairLabel y, const MarginConfig& m) {
  check_distance(d);
  if (y == PairLabel::Similar) {
    const double excess = d - m.positive;
    if (excess <= 0.0) return {0.0, 0.0};
    return {0.5 * excess * excess, excess};
  }
  const double gap = m.negative - d;
  if (gap <= 0.0) return {0.0, 0.0};
  return {0.5 * gap * gap, -gap};
}

TripletValue triplet_loss(double d_ap, double d_an, double margin) {
  check_distance(d_ap);
  check_distance(d_an);
  const double violation = d_ap * d_ap - d_an * d_an + margin;
  if (violation <= 0.0) return {};
  return {0.5 * violation, d_ap, -d_an};
}

CrossEntropyValue weighted_cross_entropy(ConstSpan logits, std::size_t target,
                                         const ClassWeights& w) {
  require(!logits.empty() && target < logits.size(), ErrorCode::BadTarget,
          "target " + std::to_string(target) + " outside " + std::to_string(logits.size()) +
              " classes");
  require(w.values.size() == logits.size(), ErrorCode::DimMismatch,
          "class weight count does not match logits");
  check_finite(logits, "logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vec prob(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    prob[k] = std::exp(logits[k] - top);
    sum += prob[k];
  }
  const double log_sum = std::log(sum);
  const double weight = w.values[target];
  CrossEntropyValue out;
  out.loss = weight * (log_sum - (logits[target] - top));
  out.grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double p = prob[k] / sum;
    out.grad[k] = weight * (p - (k == target ? 1.0 : 0.0));
  }
  return out;
}

ClassWeights class_weights_from_counts(std::span<const std::size_t> counts) {
  require(!counts.empty(), ErrorCode::EmptyClass, "no classes");
  double total = 0.0;
  for (std::size_t c : counts) {
    require(c >= 1, ErrorCode::EmptyClass, "class with zero items");
    total += static_cast<double>(c);
  }
  const double mean = total / static_cast<double>(counts.size());
  ClassWeights w;
  w.values.reserve(counts.size());
  for (std::size_t c : counts) w.values.push_back(mean / static_cast<double>(c));
  return w;
}

DistanceWithGrad distance_with_grad(ConstSpan a, ConstSpan b) {
  DistanceWithGrad out;
  out.distance = euclidean_distance(a, b);
  out.grad_first.assign(a.size(), 0.0);
  if (out.distance < 1e-9) return out;
  for (std::size_t i = 0; i < a.size(); ++i) out.grad_first[i] = (a[i] - b[i]) / out.distance;
  return out;
}

}  // namespace dmcl
