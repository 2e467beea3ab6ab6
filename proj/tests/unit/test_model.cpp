#include <doctest.h>

#include <cmath>

#include "dmcl/losses.hpp"
#include "dmcl/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dmcl;
using testutil::error_code_of;

namespace {

ModelParams random_model(Rng& rng, std::optional<std::size_t> classes = std::nullopt) {
  const std::vector<std::size_t> dims{4, 6, 5};
  ModelParams p = init_params(dims, rng, classes);
  for (auto t : p.tensors())
    for (double& x : t) x += 0.1 * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("init_params layout and glorot bounds") {
  Rng rng(1);
  const std::vector<std::size_t> dims{16, 32, 64};
  const ModelParams p = init_params(dims, rng, 7);
  CHECK(p.layer_dims() == dims);
  CHECK(p.head->classes() == 7);
  CHECK(p.parameter_count() == 16 * 32 + 32 + 32 * 64 + 64 + 64 * 7 + 7);
  const double b1 = std::sqrt(6.0 / 48.0);
  for (double w : p.layers[0].weight.values()) CHECK(std::abs(w) <= b1);
  for (double b : p.layers[1].bias) CHECK(b == 0.0);
  CHECK_NOTHROW(p.validate());

  Rng a(5), b(5);
  const std::vector<std::size_t> small{3, 4};
  CHECK(init_params(small, a) == init_params(small, b));
  CHECK(error_code_of([&] {
          const std::vector<std::size_t> one{3};
          (void)init_params(one, rng);
        }) == ErrorCode::BadSpec);
  CHECK_FALSE(without_head(p).head.has_value());
}

TEST_CASE("parameter arithmetic helpers") {
  Rng rng(2);
  const ModelParams p = random_model(rng, 3);
  const Vec flat = flatten(p);
  CHECK(flat.size() == p.parameter_count());
  ModelParams q = zeros_like(p);
  CHECK(same_layout(p, q));
  unflatten(flat, q);
  CHECK(q == p);
  add_scaled(q, -1.0, p);
  for (double x : flatten(q)) CHECK(x == 0.0);
  ModelParams r = p;
  scale(r, 2.0);
  CHECK(flatten(r)[3] == 2.0 * flat[3]);
  CHECK_FALSE(same_layout(p, without_head(p)));
}

TEST_CASE("forward pass matches the naive loop implementation") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const ModelParams p = random_model(rng);
    const FeatureMap fm = oracle::random_map(rng, 1 + rng.index(3), 1 + rng.index(3), 4);
    const Vec pooled = oracle::naive_pooled(p, fm);
    const ForwardTrace tr = forward_trace(p, fm);
    for (std::size_t c = 0; c < pooled.size(); ++c) CHECK(std::abs(tr.pooled[c] - pooled[c]) < 1e-12);
    if (norm(pooled) > 1e-9) {
      const Vec ref = oracle::naive_embedding(p, fm);
      const Embedded e = forward_embed(p, fm);
      for (std::size_t c = 0; c < ref.size(); ++c) CHECK(std::abs(e.embedding[c] - ref[c]) < 1e-12);
      CHECK(norm(e.embedding) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward guards") {
  Rng rng(4);
  ModelParams p = random_model(rng);
  const FeatureMap wrong = oracle::random_map(rng, 2, 2, 3);
  CHECK(error_code_of([&] { (void)forward_embed(p, wrong); }) == ErrorCode::DimMismatch);

  // Zero input and non-positive biases pool to the zero vector.
  for (auto& l : p.layers) std::fill(l.bias.begin(), l.bias.end(), -0.1);
  const FeatureMap zero(2, 2, 4, 0.0);
  CHECK(forward_trace(p, zero).embedding.empty());
  CHECK(error_code_of([&] { (void)forward_embed(p, zero); }) == ErrorCode::ZeroVector);
  CHECK(error_code_of([&] { (void)forward_classify(p, zero); }) == ErrorCode::MissingHead);
}

TEST_CASE("embedding backward matches central differences") {
  Rng rng(5);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const ModelParams p = random_model(rng);
    const FeatureMap fm = oracle::random_map(rng, 2, 2, 4);
    if (forward_trace(p, fm).embedding.empty()) continue;
    const Embedded e = forward_embed(p, fm);
    if (oracle::model_near_kink(e.trace)) continue;
    Vec g(e.embedding.size());
    for (double& x : g) x = rng.normal();

    ParamGradients grads = zeros_like(p);
    backward_embedding(p, e.trace, g, grads);
    const auto f = [&](const Vec& theta) {
      ModelParams q = p;
      unflatten(theta, q);
      return dot(g, forward_embed(q, fm).embedding);
    };
    const Vec num = finite_diff_grad(f, flatten(p), 1e-5);
    const Vec ana = flatten(grads);
    for (std::size_t i = 0; i < ana.size(); ++i) CHECK(oracle::grad_close(ana[i], num[i]));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("classification backward matches central differences") {
  Rng rng(6);
  const ClassWeights w{{0.5, 1.5, 1.0}};
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const ModelParams p = random_model(rng, 3);
    const FeatureMap fm = oracle::random_map(rng, 2, 3, 4);
    ForwardTrace tr;
    const Vec logits = forward_classify(p, fm, &tr);
    if (oracle::model_near_kink(tr)) continue;
    const std::size_t target = rng.index(3);
    const CrossEntropyValue ce = weighted_cross_entropy(logits, target, w);
    ParamGradients grads = zeros_like(p);
    backward_logits(p, tr, ce.grad, grads);
    const auto f = [&](const Vec& theta) {
      ModelParams q = p;
      unflatten(theta, q);
      return weighted_cross_entropy(forward_classify(q, fm), target, w).loss;
    };
    const Vec num = finite_diff_grad(f, flatten(p), 1e-5);
    const Vec ana = flatten(grads);
    for (std::size_t i = 0; i < ana.size(); ++i) CHECK(oracle::grad_close(ana[i], num[i]));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("backward rejects a trace from another model") {
  Rng rng(7);
  const ModelParams p = random_model(rng);
  const std::vector<std::size_t> other_dims{4, 3};
  const ModelParams other = init_params(other_dims, rng);
  const FeatureMap fm = oracle::random_map(rng, 2, 2, 4, 0.0);
  const ForwardTrace tr = forward_trace(other, fm);
  ParamGradients g = zeros_like(p);
  CHECK(error_code_of([&] { backward_pooled(p, tr, Vec(5, 1.0), g); }) == ErrorCode::TraceMismatch);
}
