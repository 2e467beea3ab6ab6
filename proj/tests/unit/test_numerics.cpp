#include <doctest.h>

#include <cmath>
#include <set>

#include "dmcl/error.hpp"
#include "dmcl/numerics.hpp"
#include "dmcl/pca.hpp"
#include "dmcl/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dmcl;
using testutil::error_code_of;

namespace {

Mat gaussian_rows(Rng& rng, std::size_t n, std::size_t d) {
  Mat m(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = rng.normal() * (1.0 + static_cast<double>(c));
  return m;
}

}  // namespace

TEST_CASE("vector basics") {
  const Vec a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  CHECK(squared_norm(a) == 14.0);
  CHECK(norm(Vec{3, 4}) == 5.0);
  CHECK(euclidean_distance(Vec{0, 0}, Vec{3, 4}) == 5.0);
  Vec y{1, 1, 1};
  axpy(2.0, a, y);
  CHECK(y == Vec{3, 5, 7});
}

TEST_CASE("l2_normalize") {
  const Vec u = l2_normalize(Vec{3, 4});
  CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(error_code_of([] { (void)l2_normalize(Vec{0, 0, 0}); }) == ErrorCode::ZeroVector);
  CHECK(error_code_of([] { (void)l2_normalize(Vec{1e-300, 0}); }) == ErrorCode::ZeroVector);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Vec v(7);
    for (double& x : v) x = rng.normal();
    CHECK(norm(l2_normalize(v)) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("finiteness checks") {
  CHECK(all_finite(Vec{1, 2}));
  CHECK_FALSE(all_finite(Vec{1, NAN}));
  CHECK_FALSE(all_finite(Vec{INFINITY}));
  CHECK(error_code_of([] { check_finite(Vec{1, NAN}, "x"); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("matvec and transpose agree with loops") {
  Rng rng(5);
  Mat m(3, 4);
  for (double& x : m.values()) x = rng.normal();
  const Vec v{1, -2, 0.5, 3};
  const Vec out = matvec(m, v);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += m(r, c) * v[c];
    CHECK(out[r] == doctest::Approx(s).epsilon(1e-15));
  }
  const Vec w{1, 2, 3};
  const Vec t = matvec_transposed(m, w);
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 3; ++r) s += m(r, c) * w[r];
    CHECK(t[c] == doctest::Approx(s).epsilon(1e-15));
  }
  CHECK(error_code_of([] { Mat(2, 2, Vec{1, 2, 3}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("finite_diff_grad is exact on quadratics up to rounding") {
  const auto f = [](const Vec& x) { return 3 * x[0] * x[0] + x[0] * x[1] - 2 * x[1]; };
  const Vec g = finite_diff_grad(f, Vec{1.5, -0.5}, 1e-5);
  CHECK(g[0] == doctest::Approx(6 * 1.5 - 0.5).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(1.5 - 2).epsilon(1e-8));
}

TEST_CASE("rng engine matches the standard mt19937_64 sequence") {
  // The standard requires the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("rng determinism and forks") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);

  Rng base(7);
  Rng f1 = base.fork(1), f1b = base.fork(1), f2 = base.fork(2);
  const auto x1 = f1.next_u64();
  CHECK(x1 == f1b.next_u64());
  CHECK(x1 != f2.next_u64());
}

TEST_CASE("rng distributions") {
  Rng rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const std::size_t k = rng.index(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int cnt : counts) CHECK(std::abs(cnt - 10000) < 500);

  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }

  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 20);
}

TEST_CASE("sample covariance matches the oracle") {
  Rng rng(2);
  const Mat data = gaussian_rows(rng, 30, 5);
  Vec mean;
  const Mat cov = sample_covariance(data, &mean);
  const auto ref = oracle::covariance(oracle::rows_of(data));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(cov(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-12));
}

TEST_CASE("pca_fit agrees with a Jacobi eigensolver") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + trial % 7;
    const Mat data = gaussian_rows(rng, 40, d);
    const PcaModel pca = pca_fit(data, d);
    const auto ref = oracle::jacobi_eigen(oracle::covariance(oracle::rows_of(data)));
    for (std::size_t k = 0; k < d; ++k) {
      CHECK(pca.explained_variance[k] == doctest::Approx(ref.values[k]).epsilon(1e-9));
      for (std::size_t j = 0; j < d; ++j)
        CHECK(std::abs(pca.components(k, j) - ref.vectors[k][j]) < 1e-8);
    }
    for (std::size_t k = 1; k < d; ++k)
      CHECK(pca.explained_variance[k] <= pca.explained_variance[k - 1]);
  }
}

TEST_CASE("pca components are orthonormal and full rank preserves distances") {
  Rng rng(4);
  const Mat data = gaussian_rows(rng, 50, 8);
  const PcaModel pca = pca_fit(data, 8);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b)
      CHECK(dot(pca.components.row(a), pca.components.row(b)) ==
            doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 49; ++i) {
    const double before = euclidean_distance(data.row(i), data.row(i + 1));
    const double after = euclidean_distance(pca_apply(pca, data.row(i)), pca_apply(pca, data.row(i + 1)));
    CHECK(std::abs(before - after) <= 1e-9);
  }
}

TEST_CASE("pca truncation and rank handling") {
  Rng rng(6);
  const Mat data = gaussian_rows(rng, 20, 6);
  const PcaModel half = pca_fit(data, 3);
  CHECK(half.out_dim() == 3);
  CHECK(pca_apply(half, data.row(0)).size() == 3);

  // Rank-2 data in 4 dimensions.
  Mat low(10, 4);
  for (std::size_t r = 0; r < 10; ++r) {
    const double a = rng.normal(), b = rng.normal();
    low(r, 0) = a;
    low(r, 1) = b;
    low(r, 2) = a + b;
    low(r, 3) = a - b;
  }
  CHECK(error_code_of([&] { (void)pca_fit(low, 3); }) == ErrorCode::RankDeficient);
  CHECK(pca_fit(low, 3, RankPolicy::AllowPadding).out_dim() == 3);
  CHECK(pca_fit(low, 2).out_dim() == 2);
  CHECK(error_code_of([&] { (void)pca_fit(low, 5); }) == ErrorCode::InsufficientSamples);
  CHECK(error_code_of([&] { (void)pca_apply(half, Vec{1, 2}); }) == ErrorCode::DimMismatch);
}

TEST_CASE("error categories") {
  CHECK(category_of(ErrorCode::ZeroVector) == ErrorCategory::Numeric);
  CHECK(category_of(ErrorCode::NonFiniteGradient) == ErrorCategory::Numeric);
  CHECK(category_of(ErrorCode::SchemaError) == ErrorCategory::Schema);
  CHECK(category_of(ErrorCode::IoError) == ErrorCategory::Io);
  CHECK(category_of(ErrorCode::ChecksumMismatch) == ErrorCategory::Io);
  CHECK(category_of(ErrorCode::NoRelevant) == ErrorCategory::Domain);
  CHECK(category_of(ErrorCode::InvertedDistributions) == ErrorCategory::Domain);
}
