#include <doctest.h>

#include "dmcl/aggregation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dmcl;
using testutil::error_code_of;

TEST_CASE("feature map construction guards") {
  CHECK(error_code_of([] { FeatureMap(0, 2, 3, std::vector<double>{}); }) == ErrorCode::EmptyMap);
  CHECK(error_code_of([] { FeatureMap(1, 1, 2, std::vector<double>{1.0}); }) == ErrorCode::ShapeMismatch);
  CHECK(error_code_of([] { FeatureMap(1, 1, 2, std::vector<double>{1.0, -0.5}); }) ==
        ErrorCode::NonFiniteValue);
  CHECK(error_code_of([] { FeatureMap(1, 1, 1, std::vector<double>{NAN}); }) == ErrorCode::NonFiniteValue);
  const FeatureMap fm(2, 3, 1, std::vector<double>{0, 1, 2, 3, 4, 5});
  CHECK(fm.at(1, 2, 0) == 5.0);
  const FeatureMap c = fm.crop(1, 1, 1, 2);
  CHECK(c.values() == std::vector<double>{4, 5});
  CHECK(error_code_of([&] { (void)fm.crop(1, 2, 1, 2); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("mac and spoc examples") {
  // 2x2 grid, 2 channels.
  const FeatureMap fm(2, 2, 2, std::vector<double>{1, 0, 3, 2, 0, 5, 2, 1});
  CHECK(mac(fm) == Vec{3, 5});
  CHECK(spoc(fm) == Vec{6, 8});
  CHECK(mac_argmax(fm) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("mac argmax ties go to the first location in row-major order") {
  const FeatureMap fm(2, 2, 1, std::vector<double>{0, 4, 4, 4});
  CHECK(mac_argmax(fm) == std::vector<std::size_t>{1});
  const FeatureMap flat(3, 1, 2, std::vector<double>(6, 0.0));
  CHECK(mac_argmax(flat) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("mac_backward routes each channel to its argmax") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap fm = oracle::random_map(rng, 3, 2, 4);
    const Vec up{1.0, -2.0, 0.5, 3.0};
    const FeatureMapGrad g = mac_backward(fm, up);
    const auto arg = mac_argmax(fm);
    for (std::size_t l = 0; l < fm.locations(); ++l)
      for (std::size_t c = 0; c < 4; ++c)
        CHECK(g.values[l * 4 + c] == (l == arg[c] ? up[c] : 0.0));
  }
  const FeatureMap fm(1, 1, 2, std::vector<double>{1, 1});
  CHECK(error_code_of([&] { (void)mac_backward(fm, Vec{1}); }) == ErrorCode::DimMismatch);
}

TEST_CASE("mac is invariant to location permutations and bounded by spoc") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap fm = oracle::random_map(rng, 2, 3, 5);
    std::vector<double> rev;
    for (std::size_t l = fm.locations(); l-- > 0;) {
      const auto loc = fm.location(l);
      rev.insert(rev.end(), loc.begin(), loc.end());
    }
    const FeatureMap flipped(3, 2, 5, rev);
    CHECK(mac(fm) == mac(flipped));
    const Vec m = mac(fm), s = spoc(fm);
    for (std::size_t c = 0; c < 5; ++c) CHECK(m[c] <= s[c] + 1e-12);
  }
}

TEST_CASE("postprocess pipeline") {
  const Vec out = postprocess({}, Vec{3, 4});
  CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-15));

  PcaModel identity;
  identity.mean = Vec(3, 0.0);
  identity.components = Mat(3, 3);
  for (std::size_t i = 0; i < 3; ++i) identity.components(i, i) = 1.0;
  identity.explained_variance = Vec(3, 1.0);
  const Vec raw{1, 2, 2};
  const Vec a = postprocess({}, raw);
  const Vec b = postprocess({identity}, raw);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);

  Rng rng(3);
  Mat data(200, 96);
  for (double& x : data.values()) x = rng.uniform();
  PostProcessPipeline p{pca_fit(data, 64)};
  CHECK(p.target_dim(96) == 64);
  const Vec r = postprocess(p, data.row(5));
  CHECK(r.size() == 64);
  CHECK(norm(r) == doctest::Approx(1.0).epsilon(1e-12));
}
