#include "dmcl/model.hpp"

#include <cmath>

#include "dmcl/error.hpp"

namespace dmcl {

std::vector<std::size_t> ModelParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(layers.front().in_dim());
  for (const auto& l : layers) dims.push_back(l.out_dim());
  return dims;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

std::vector<std::span<double>> ModelParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  if (head) {
    out.emplace_back(head->weight.values());
    out.emplace_back(head->bias);
  }
  return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  if (head) {
    out.emplace_back(head->weight.values());
    out.emplace_back(head->bias);
  }
  return out;
}

void ModelParams::validate() const {
  require(!layers.empty(), ErrorCode::BadSpec, "model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    require(l.in_dim() >= 1 && l.out_dim() >= 1, ErrorCode::BadSpec, "empty layer");
    require(l.bias.size() == l.out_dim(), ErrorCode::BadSpec, "bias size mismatch");
    if (i > 0)
      require(layers[i - 1].out_dim() == l.in_dim(), ErrorCode::BadSpec,
              "layer " + std::to_string(i) + " input does not chain");
  }
  if (head) {
    require(head->weight.cols() == embedding_dim(), ErrorCode::BadSpec,
            "head input does not match embedding dim");
    require(head->bias.size() == head->classes() && head->classes() >= 1, ErrorCode::BadSpec,
            "head bias size mismatch");
  }
  for (const auto& t : tensors()) check_finite(t, "model parameters");
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.layers.reserve(p.layers.size());
  for (const auto& l : p.layers)
    z.layers.push_back({Mat(l.weight.rows(), l.weight.cols()), Vec(l.bias.size(), 0.0)});
  if (p.head)
    z.head = ClassifierHead{Mat(p.head->weight.rows(), p.head->weight.cols()),
                            Vec(p.head->bias.size(), 0.0)};
  return z;
}

bool same_layout(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].size() != tb[i].size()) return false;
  return a.layer_dims() == b.layer_dims();
}

void add_scaled(ModelParams& y, double a, const ModelParams& x) {
  require(same_layout(y, x), ErrorCode::ShapeMismatch, "parameter layouts differ");
  auto ty = y.tensors();
  const auto tx = x.tensors();
  for (std::size_t i = 0; i < ty.size(); ++i) axpy(a, tx[i], ty[i]);
}

void scale(ModelParams& p, double a) {
  for (auto t : p.tensors())
    for (double& v : t) v *= a;
}

Vec flatten(const ModelParams& p) {
  Vec out;
  out.reserve(p.parameter_count());
  for (const auto& t : p.tensors()) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void unflatten(std::span<const double> flat, ModelParams& into) {
  require(flat.size() == into.parameter_count(), ErrorCode::ShapeMismatch,
          "flat parameter vector has wrong length");
  std::size_t offset = 0;
  for (auto t : into.tensors()) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + t.size()), t.begin());
    offset += t.size();
  }
}

namespace {

void fill_glorot(Mat& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
}

}  // namespace

ModelParams init_params(std::span<const std::size_t> dims, Rng& rng,
                        std::optional<std::size_t> classes) {
  require(dims.size() >= 2, ErrorCode::BadSpec, "layer spec needs at least input and output dims");
  for (std::size_t d : dims) require(d >= 1, ErrorCode::BadSpec, "layer dims must be positive");
  ModelParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    AffineLayer layer{Mat(dims[i + 1], dims[i]), Vec(dims[i + 1], 0.0)};
    fill_glorot(layer.weight, rng);
    p.layers.push_back(std::move(layer));
  }
  if (classes) {
    require(*classes >= 1, ErrorCode::BadSpec, "head needs at least one class");
    ClassifierHead head{Mat(*classes, dims.back()), Vec(*classes, 0.0)};
    fill_glorot(head.weight, rng);
    p.head = std::move(head);
  }
  return p;
}

ModelParams without_head(ModelParams p) {
  p.head.reset();
  return p;
}

ForwardTrace forward_trace(const ModelParams& p, const FeatureMap& fm) {
  require(!p.layers.empty(), ErrorCode::BadSpec, "model has no layers");
  require(fm.channels() == p.input_channels(), ErrorCode::DimMismatch,
          "feature map has " + std::to_string(fm.channels()) + " channels, model expects " +
              std::to_string(p.input_channels()));
  ForwardTrace t;
  t.locations = fm.locations();
  t.input = Mat(fm.locations(), fm.channels(), fm.values());
  t.pre.reserve(p.layers.size());
  t.act.reserve(p.layers.size());

  const Mat* prev = &t.input;
  for (const auto& layer : p.layers) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    Mat z(t.locations, out);
    Mat a(t.locations, out);
    for (std::size_t l = 0; l < t.locations; ++l) {
      const double* x = prev->row(l).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double* w = layer.weight.row(o).data();
        double s = layer.bias[o];
        for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
        z(l, o) = s;
        a(l, o) = s > 0.0 ? s : 0.0;
      }
    }
    t.pre.push_back(std::move(z));
    t.act.push_back(std::move(a));
    prev = &t.act.back();
  }

  const Mat& last = t.act.back();
  const std::size_t dim = last.cols();
  t.pooled.assign(last.row(0).begin(), last.row(0).end());
  t.argmax.assign(dim, 0);
  for (std::size_t l = 1; l < t.locations; ++l) {
    const auto row = last.row(l);
    for (std::size_t c = 0; c < dim; ++c) {
      if (row[c] > t.pooled[c]) {
        t.pooled[c] = row[c];
        t.argmax[c] = l;
      }
    }
  }
  check_finite(t.pooled, "pooled vector");
  t.pooled_norm = norm(t.pooled);
  if (t.pooled_norm > 1e-15 * static_cast<double>(dim)) {
    t.embedding = t.pooled;
    for (double& v : t.embedding) v /= t.pooled_norm;
  }
  return t;
}

Embedded forward_embed(const ModelParams& p, const FeatureMap& fm) {
  ForwardTrace t = forward_trace(p, fm);
  require(!t.embedding.empty(), ErrorCode::ZeroVector, "pooled vector is all zero");
  Vec e = t.embedding;
  return {std::move(e), std::move(t)};
}

Vec forward_classify(const ModelParams& p, const FeatureMap& fm, ForwardTrace* trace) {
  require(p.head.has_value(), ErrorCode::MissingHead, "model has no classification head");
  ForwardTrace t = forward_trace(p, fm);
  Vec logits = matvec(p.head->weight, t.pooled);
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += p.head->bias[k];
  if (trace) *trace = std::move(t);
  return logits;
}

namespace {

void check_trace(const ModelParams& p, const ForwardTrace& t) {
  bool ok = t.pre.size() == p.layers.size() && t.act.size() == p.layers.size() &&
            t.input.cols() == p.input_channels() && t.input.rows() == t.locations &&
            t.pooled.size() == p.embedding_dim() && t.argmax.size() == p.embedding_dim();
  for (std::size_t i = 0; ok && i < p.layers.size(); ++i)
    ok = t.pre[i].cols() == p.layers[i].out_dim() && t.pre[i].rows() == t.locations;
  require(ok, ErrorCode::TraceMismatch, "forward trace does not match parameters");
}

}  // namespace

void backward_pooled(const ModelParams& p, const ForwardTrace& t, ConstSpan d_pooled,
                     ParamGradients& grads) {
  check_trace(p, t);
  require(d_pooled.size() == p.embedding_dim(), ErrorCode::DimMismatch,
          "pooled gradient has wrong dim");
  require(grads.layers.size() == p.layers.size(), ErrorCode::ShapeMismatch,
          "gradient layout does not match parameters");

  const std::size_t n_layers = p.layers.size();
  const std::size_t locs = t.locations;

  // Gradient w.r.t. the last activation is nonzero only at argmax locations.
  Mat d_act(locs, p.embedding_dim());
  std::vector<char> active(locs, 0);
  for (std::size_t c = 0; c < d_pooled.size(); ++c) {
    if (d_pooled[c] == 0.0) continue;
    d_act(t.argmax[c], c) += d_pooled[c];
    active[t.argmax[c]] = 1;
  }

  for (std::size_t li = n_layers; li-- > 0;) {
    const AffineLayer& layer = p.layers[li];
    AffineLayer& g = grads.layers[li];
    const Mat& z = t.pre[li];
    const Mat& below = li == 0 ? t.input : t.act[li - 1];
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();

    Mat d_below(li == 0 ? 0 : locs, li == 0 ? 0 : in);
    std::vector<char> below_active(locs, 0);
    for (std::size_t l = 0; l < locs; ++l) {
      if (!active[l]) continue;
      const double* x = below.row(l).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double dz = z(l, o) > 0.0 ? d_act(l, o) : 0.0;
        if (dz == 0.0) continue;
        g.bias[o] += dz;
        double* gw = g.weight.row(o).data();
        for (std::size_t i = 0; i < in; ++i) gw[i] += dz * x[i];
        if (li > 0) {
          const double* w = layer.weight.row(o).data();
          double* db = d_below.row(l).data();
          for (std::size_t i = 0; i < in; ++i) db[i] += dz * w[i];
          below_active[l] = 1;
        }
      }
    }
    if (li == 0) break;
    d_act = std::move(d_below);
    active = std::move(below_active);
  }
}

void backward_embedding(const ModelParams& p, const ForwardTrace& t, ConstSpan d_embedding,
                        ParamGradients& grads) {
  check_trace(p, t);
  require(d_embedding.size() == p.embedding_dim(), ErrorCode::DimMismatch,
          "embedding gradient has wrong dim");
  require(!t.embedding.empty(), ErrorCode::ZeroVector, "trace has no embedding");
  // d/dx (x / |x|) = (I - u u^T) / |x|
  const double proj = dot(t.embedding, d_embedding);
  Vec d_pooled(d_embedding.size());
  for (std::size_t i = 0; i < d_pooled.size(); ++i)
    d_pooled[i] = (d_embedding[i] - t.embedding[i] * proj) / t.pooled_norm;
  backward_pooled(p, t, d_pooled, grads);
}

void backward_logits(const ModelParams& p, const ForwardTrace& t, ConstSpan d_logits,
                     ParamGradients& grads) {
  require(p.head.has_value() && grads.head.has_value(), ErrorCode::MissingHead,
          "backward_logits needs a head");
  check_trace(p, t);
  require(d_logits.size() == p.head->classes(), ErrorCode::DimMismatch,
          "logit gradient has wrong dim");
  for (std::size_t k = 0; k < d_logits.size(); ++k) {
    if (d_logits[k] == 0.0) continue;
    grads.head->bias[k] += d_logits[k];
    axpy(d_logits[k], t.pooled, grads.head->weight.row(k));
  }
  const Vec d_pooled = matvec_transposed(p.head->weight, d_logits);
  backward_pooled(p, t, d_pooled, grads);
}

}  // namespace dmcl
