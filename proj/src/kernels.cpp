#include "dmcl/kernels.hpp"

#include "dmcl/detail/parallel.hpp"
#include "dmcl/error.hpp"

namespace dmcl {

using detail::parallel_for;

Mat embed_items(const ModelParams& p, std::span<const FeatureMap> features,
                std::span<const std::size_t> indices, ExecMode mode) {
  Mat out(indices.size(), p.embedding_dim());
  const auto one = [&](std::size_t i) {
    const Embedded e = forward_embed(p, features[indices[i]]);
    std::copy(e.embedding.begin(), e.embedding.end(), out.row(i).begin());
  };
  if (mode == ExecMode::Parallel) {
    parallel_for(indices.size(), one);
  } else {
    for (std::size_t i = 0; i < indices.size(); ++i) one(i);
  }
  return out;
}

Mat pool_items(std::span<const FeatureMap> features, std::span<const std::size_t> indices,
               Pooling pooling, ExecMode mode) {
  require(!indices.empty(), ErrorCode::InsufficientSamples, "no items to pool");
  Mat out(indices.size(), features[indices[0]].channels());
  const auto one = [&](std::size_t i) {
    const FeatureMap& fm = features[indices[i]];
    require(fm.channels() == out.cols(), ErrorCode::DimMismatch, "channel count varies");
    const Vec v = pooling == Pooling::Mac ? mac(fm) : spoc(fm);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  };
  if (mode == ExecMode::Parallel) {
    parallel_for(indices.size(), one);
  } else {
    for (std::size_t i = 0; i < indices.size(); ++i) one(i);
  }
  return out;
}

Mat distance_matrix(const Mat& queries, const Mat& database, ExecMode mode) {
  require(queries.cols() == database.cols(), ErrorCode::DimMismatch,
          "query dim " + std::to_string(queries.cols()) + " != database dim " +
              std::to_string(database.cols()));
  Mat out(queries.rows(), database.rows());
  const auto one = [&](std::size_t q) {
    for (std::size_t j = 0; j < database.rows(); ++j)
      out(q, j) = euclidean_distance(queries.row(q), database.row(j));
  };
  if (mode == ExecMode::Parallel) {
    parallel_for(queries.rows(), one);
  } else {
    for (std::size_t q = 0; q < queries.rows(); ++q) one(q);
  }
  return out;
}

GradientSum accumulate_gradients(std::size_t count, const SampleGradient& sample,
                                 ParamGradients& acc, ExecMode mode) {
  GradientSum sum;
  if (mode == ExecMode::Serial) {
    for (std::size_t i = 0; i < count; ++i) {
      if (const auto loss = sample(i, acc)) {
        sum.loss += *loss;
        ++sum.used;
      }
    }
    return sum;
  }

  std::vector<ParamGradients> buffers(count, zeros_like(acc));
  std::vector<std::optional<double>> losses(count);
  parallel_for(count, [&](std::size_t i) { losses[i] = sample(i, buffers[i]); });
  for (std::size_t i = 0; i < count; ++i) {
    if (!losses[i]) continue;
    add_scaled(acc, 1.0, buffers[i]);
    sum.loss += *losses[i];
    ++sum.used;
  }
  return sum;
}

}  // namespace dmcl
