#include "dmcl/numerics.hpp"

#include <cmath>

#include "dmcl/error.hpp"

namespace dmcl {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(values_.size() == rows_ * cols_, ErrorCode::ShapeMismatch,
          "matrix value count " + std::to_string(values_.size()) + " != " +
              std::to_string(rows_) + "x" + std::to_string(cols_));
}

double dot(ConstSpan a, ConstSpan b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch,
          "dot of dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(ConstSpan v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(ConstSpan v) { return std::sqrt(squared_norm(v)); }

bool all_finite(ConstSpan v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void check_finite(ConstSpan v, const std::string& what) {
  require(all_finite(v), ErrorCode::NonFiniteValue, what + " contains NaN or Inf");
}

Vec l2_normalize(ConstSpan v) {
  require(!v.empty(), ErrorCode::DimMismatch, "cannot normalize an empty vector");
  check_finite(v, "l2_normalize input");
  const double n = norm(v);
  require(n > 1e-15 * static_cast<double>(v.size()), ErrorCode::ZeroVector,
          "vector norm is zero");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double euclidean_distance(ConstSpan a, ConstSpan b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch,
          "distance between dims " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Vec matvec(const Mat& m, ConstSpan v) {
  require(m.cols() == v.size(), ErrorCode::DimMismatch,
          "matvec: matrix has " + std::to_string(m.cols()) + " cols, vector has " +
              std::to_string(v.size()));
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

Vec matvec_transposed(const Mat& m, ConstSpan v) {
  require(m.rows() == v.size(), ErrorCode::DimMismatch,
          "matvec_transposed: matrix has " + std::to_string(m.rows()) + " rows, vector has " +
              std::to_string(v.size()));
  Vec out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (v[r] == 0.0) continue;
    axpy(v[r], m.row(r), out);
  }
  return out;
}

void axpy(double a, ConstSpan x, std::span<double> y) {
  require(x.size() == y.size(), ErrorCode::DimMismatch, "axpy size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  require(h > 0.0, ErrorCode::BadSpec, "finite difference step must be positive");
  Vec probe = x;
  Vec grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    require(std::isfinite(up) && std::isfinite(down), ErrorCode::NonFiniteValue,
            "finite difference probe " + std::to_string(i) + " is not finite");
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace dmcl
