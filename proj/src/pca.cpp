#include "dmcl/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dmcl/error.hpp"

namespace dmcl {

Mat sample_covariance(const Mat& data, Vec* mean_out) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  require(n >= 2, ErrorCode::InsufficientSamples, "covariance needs at least 2 samples");
  Vec mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) axpy(1.0, data.row(r), mean);
  for (double& m : mean) m /= static_cast<double>(n);

  Mat cov(d, d, 0.0);
  Vec centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = data.row(r);
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += ci * centered[j];
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= denom;
      cov(j, i) = cov(i, j);
    }
  }
  if (mean_out) *mean_out = std::move(mean);
  return cov;
}

PcaModel pca_fit(const Mat& data, std::size_t out_dim, RankPolicy policy) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  require(n >= 2, ErrorCode::InsufficientSamples,
          "PCA needs at least 2 samples, got " + std::to_string(n));
  require(out_dim >= 1 && out_dim <= d && out_dim <= n - 1, ErrorCode::InsufficientSamples,
          "PCA out_dim " + std::to_string(out_dim) + " exceeds min(samples - 1, dim) = " +
              std::to_string(std::min(n - 1, d)));
  check_finite(data.values(), "PCA data");

  PcaModel model;
  const Mat cov = sample_covariance(data, &model.mean);

  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = cov(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  require(solver.info() == Eigen::Success, ErrorCode::NonFiniteValue,
          "covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  const double top = std::max(evals(d - 1), 0.0);
  const double zero_tol = 1e-12 * std::max(1.0, top);

  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < d; ++i)
    if (evals(i) > zero_tol) ++nonzero;
  if (nonzero < out_dim && policy == RankPolicy::Strict)
    fail(ErrorCode::RankDeficient, "covariance has " + std::to_string(nonzero) +
                                       " nonzero eigenvalues, " + std::to_string(out_dim) +
                                       " requested");

  model.components = Mat(out_dim, d);
  model.explained_variance.assign(out_dim, 0.0);
  for (std::size_t k = 0; k < out_dim; ++k) {
    const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - k);
    const double var = evals(src);
    model.explained_variance[k] = var > zero_tol ? var : 0.0;

    std::size_t pivot = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(evecs(j, src)) > std::abs(evecs(pivot, src))) pivot = j;
    const double sign = evecs(pivot, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) model.components(k, j) = sign * evecs(j, src);
  }
  return model;
}

Vec pca_apply(const PcaModel& model, ConstSpan v) {
  require(v.size() == model.in_dim(), ErrorCode::DimMismatch,
          "PCA expects dim " + std::to_string(model.in_dim()) + ", got " +
              std::to_string(v.size()));
  Vec centered(v.begin(), v.end());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] -= model.mean[i];
  return matvec(model.components, centered);
}

}  // namespace dmcl
