#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dmcl {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool same_shape(const Mat& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

double dot(ConstSpan a, ConstSpan b);
double squared_norm(ConstSpan v);
double norm(ConstSpan v);

bool all_finite(ConstSpan v);
/// Throws NonFiniteValue naming `what` if any entry is NaN or infinite.
void check_finite(ConstSpan v, const std::string& what);

/// Unit-length copy of v. Throws ZeroVector when ||v|| <= 1e-15 * dim.
[[nodiscard]] Vec l2_normalize(ConstSpan v);

double euclidean_distance(ConstSpan a, ConstSpan b);

/// out = m * v
Vec matvec(const Mat& m, ConstSpan v);
/// out = m^T * v
Vec matvec_transposed(const Mat& m, ConstSpan v);

/// y += a * x
void axpy(double a, ConstSpan x, std::span<double> y);

/// Central-difference gradient of f at x with step h.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

}  // namespace dmcl
