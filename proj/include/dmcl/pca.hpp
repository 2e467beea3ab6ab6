#pragma once

#include <cstddef>

#include "dmcl/numerics.hpp"

namespace dmcl {

struct PcaModel {
  Vec mean;                 // D_in
  Mat components;           // D_out x D_in, orthonormal rows
  Vec explained_variance;   // D_out, non-increasing

  std::size_t in_dim() const noexcept { return mean.size(); }
  std::size_t out_dim() const noexcept { return components.rows(); }
};

enum class RankPolicy {
  Strict,        // throw RankDeficient when fewer than out_dim nonzero eigenvalues
  AllowPadding,  // keep the zero-variance directions
};

/// Fits PCA on rows-as-samples data through the eigendecomposition of the
/// sample covariance (normalized by n - 1). Components are ordered by
/// decreasing eigenvalue and signed so their largest-magnitude coordinate is
/// positive.
PcaModel pca_fit(const Mat& data, std::size_t out_dim, RankPolicy policy = RankPolicy::Strict);

/// components * (v - mean)
Vec pca_apply(const PcaModel& model, ConstSpan v);

/// Sample covariance (n - 1 normalization) of rows-as-samples data.
Mat sample_covariance(const Mat& data, Vec* mean_out = nullptr);

}  // namespace dmcl
