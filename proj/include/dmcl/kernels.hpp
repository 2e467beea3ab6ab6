#pragma once

// Data-parallel hot loops. Each kernel has a serial reference path and an
// OpenMP path; tests compare the two and bench/ times them.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include "dmcl/aggregation.hpp"
#include "dmcl/model.hpp"
#include "dmcl/numerics.hpp"

namespace dmcl {

enum class ExecMode { Serial, Parallel };

/// Unit-norm embeddings of features[indices[i]] as rows. Throws ZeroVector if
/// any item pools to zero.
Mat embed_items(const ModelParams& p, std::span<const FeatureMap> features,
                std::span<const std::size_t> indices, ExecMode mode = ExecMode::Serial);

/// Raw pooled vectors (mac or spoc of the input maps, no model) as rows.
enum class Pooling { Mac, Spoc };
Mat pool_items(std::span<const FeatureMap> features, std::span<const std::size_t> indices,
               Pooling pooling, ExecMode mode = ExecMode::Serial);

/// out(i, j) = ||queries.row(i) - database.row(j)||
Mat distance_matrix(const Mat& queries, const Mat& database, ExecMode mode = ExecMode::Serial);

/// Per-sample gradient callback: accumulates into the given buffer and
/// returns the sample's loss, or nullopt when the sample is skipped.
using SampleGradient = std::function<std::optional<double>(std::size_t, ParamGradients&)>;

struct GradientSum {
  double loss = 0.0;
  std::size_t used = 0;
};

/// Sums per-sample gradients of samples [0, count) into `acc`.
/// Serial accumulates in place in sample order. Parallel evaluates samples
/// into private buffers concurrently and reduces them in sample order, so its
/// result is deterministic and differs from Serial only by reassociation.
GradientSum accumulate_gradients(std::size_t count, const SampleGradient& sample,
                                 ParamGradients& acc, ExecMode mode = ExecMode::Serial);

}  // namespace dmcl
