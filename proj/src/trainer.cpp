#include "dmcl/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include "dmcl/error.hpp"
#include "dmcl/sampling.hpp"

namespace dmcl {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Classification: return "cls";
    case Stage::RetrievalSingle: return "retr-s";
    case Stage::RetrievalDouble: return "retr-d";
    case Stage::RetrievalTriplet: return "retr-t";
  }
  return "cls";
}

Stage parse_stage(std::string_view s) {
  if (s == "cls") return Stage::Classification;
  if (s == "retr-s") return Stage::RetrievalSingle;
  if (s == "retr-d") return Stage::RetrievalDouble;
  if (s == "retr-t") return Stage::RetrievalTriplet;
  fail(ErrorCode::SchemaError, "unknown stage '" + std::string(s) + "'");
}

bool is_retrieval(Stage s) { return s != Stage::Classification; }

OptimizerState OptimizerState::fresh(const ModelParams& params, const OptimizerConfig& cfg) {
  return {zeros_like(params), cfg.lr, cfg.momentum, cfg.weight_decay, cfg.decay_factor,
          cfg.decay_period};
}

void sgd_step(ModelParams& params, const ParamGradients& grads, OptimizerState& state) {
  require(same_layout(params, grads) && same_layout(params, state.velocity),
          ErrorCode::ShapeMismatch, "parameter, gradient and velocity layouts differ");
  for (const auto& t : grads.tensors())
    require(all_finite(t), ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
  auto theta = params.tensors();
  auto vel = state.velocity.tensors();
  const auto g = grads.tensors();
  for (std::size_t t = 0; t < theta.size(); ++t) {
    for (std::size_t i = 0; i < theta[t].size(); ++i) {
      const double gi = g[t][i] + state.weight_decay * theta[t][i];
      vel[t][i] = state.momentum * vel[t][i] + gi;
      theta[t][i] -= state.lr * vel[t][i];
    }
  }
}

double lr_at_epoch(double initial, int epoch, int period, double factor) {
  require(period >= 1 && factor > 0.0 && epoch >= 0, ErrorCode::BadSpec,
          "lr schedule needs period >= 1, factor > 0, epoch >= 0");
  return initial / std::pow(factor, static_cast<double>(epoch / period));
}

void TrainConfig::validate() const {
  require(virtual_batch >= 1, ErrorCode::BadSpec, "virtual batch must be >= 1");
  require(max_epochs >= 1, ErrorCode::BadSpec, "max epochs must be >= 1");
  require(regeneration_period >= 1, ErrorCode::BadSpec, "regeneration period must be >= 1");
  require(eval_every >= 1, ErrorCode::BadSpec, "eval_every must be >= 1");
  require(pairs_per_class >= 1, ErrorCode::BadSpec, "pairs per class must be >= 1");
  require(optimizer.lr >= 0.0 && std::isfinite(optimizer.lr), ErrorCode::BadSpec,
          "learning rate must be finite and non-negative");
  require(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0, ErrorCode::BadSpec,
          "momentum must be in [0, 1)");
  require(optimizer.weight_decay >= 0.0, ErrorCode::BadSpec, "weight decay must be >= 0");
  require(optimizer.decay_factor > 0.0 && optimizer.decay_period >= 1, ErrorCode::BadSpec,
          "bad lr decay schedule");
  require(jitter_min_fraction > 0.0 && jitter_min_fraction <= 1.0, ErrorCode::BadSpec,
          "jitter_min_fraction must be in (0, 1]");
  require(cls_train_fraction > 0.0 && cls_train_fraction < 1.0, ErrorCode::BadSpec,
          "cls_train_fraction must be in (0, 1)");
  require(triplet_margin >= 0.0, ErrorCode::BadSpec, "triplet margin must be >= 0");
  if (margin_mode == MarginMode::Fixed && is_retrieval(stage) && stage != Stage::RetrievalTriplet)
    margins.validate();
  if (margin_mode == MarginMode::Suggested)
    require(margin_sample_pairs >= 1, ErrorCode::BadSpec, "margin_sample_pairs must be >= 1");
}

std::uint64_t TrainConfig::hash() const {
  std::ostringstream os;
  const auto bits = [](double d) { return std::bit_cast<std::uint64_t>(d); };
  os << to_string(stage) << '|' << bits(margins.positive) << '|' << bits(margins.negative) << '|'
     << static_cast<int>(margin_mode) << '|' << bits(margin_offsets.positive) << '|'
     << bits(margin_offsets.negative) << '|' << margin_sample_pairs << '|' << bits(triplet_margin)
     << '|' << virtual_batch << '|' << max_epochs << '|' << pairs_per_class << '|'
     << regeneration_period << '|' << eval_every << '|' << bits(optimizer.lr) << '|'
     << bits(optimizer.momentum) << '|' << bits(optimizer.weight_decay) << '|'
     << bits(optimizer.decay_factor) << '|' << optimizer.decay_period << '|' << grid_jitter << '|'
     << bits(jitter_min_fraction) << '|' << bits(cls_train_fraction) << '|' << Rng::kAlgorithm;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

FeatureMap jitter_crop(const FeatureMap& fm, double min_fraction, Rng& rng) {
  const auto side = [&](std::size_t full) {
    const auto lo = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(min_fraction * static_cast<double>(full))));
    const std::size_t len = lo + rng.index(full - lo + 1);
    const std::size_t start = rng.index(full - len + 1);
    return std::pair{start, len};
  };
  const auto [top, h] = side(fm.height());
  const auto [left, w] = side(fm.width());
  if (h == fm.height() && w == fm.width()) return fm;
  return fm.crop(top, left, h, w);
}

std::size_t classification_class_count(const Dataset& data) {
  std::vector<int> classes = data.manifest.classes(Split::Train);
  const auto val = data.manifest.classes(Split::Validation);
  classes.insert(classes.end(), val.begin(), val.end());
  return classes.size();
}

EvalReport evaluate_split(const ModelParams& params, const Dataset& data, Split split,
                          ExecMode mode) {
  const auto q = data.queries(split);
  const auto db = data.database(split);
  require(!q.empty() && !db.empty(), ErrorCode::EmptyValidation,
          std::string("split '") + std::string(to_string(split)) + "' has no queries or database");
  const ModelParams embed_params = without_head(params);
  Mat qe = embed_items(embed_params, data.features, q, mode);
  Mat de = embed_items(embed_params, data.features, db, mode);
  std::vector<int> ql;
  std::vector<int> dl;
  std::vector<std::string> ids;
  for (std::size_t i : q) ql.push_back(data.manifest.entries[i].class_id);
  for (std::size_t i : db) {
    dl.push_back(data.manifest.entries[i].class_id);
    ids.push_back(data.manifest.entries[i].item_id);
  }
  const RetrievalIndex index = RetrievalIndex::build(std::move(de), std::move(dl), std::move(ids));
  return evaluate(index, qe, ql, mode);
}

DistanceDistributions model_distance_distributions(const ModelParams& params, const Dataset& data,
                                                   Split split, std::size_t sample_pairs,
                                                   Rng& rng, ExecMode mode) {
  const auto idx = data.indices(split);
  const Mat emb = embed_items(without_head(params), data.features, idx, mode);
  std::vector<int> labels;
  for (std::size_t i : idx) labels.push_back(data.manifest.entries[i].class_id);
  return distance_distributions(emb, labels, sample_pairs, rng);
}

MarginConfig margins_from_model(const ModelParams& params, const Dataset& data,
                                std::size_t sample_pairs, const MarginOffsets& offsets, Rng& rng,
                                ExecMode mode) {
  const auto dist = model_distance_distributions(params, data, Split::Train, sample_pairs, rng, mode);
  const MarginConfig start = suggest_margins(dist.positive, dist.negative);
  MarginConfig m{std::clamp(start.positive + offsets.positive, 0.0, 2.0),
                 std::clamp(start.negative + offsets.negative, 0.0, 2.0)};
  require(m.positive < m.negative, ErrorCode::InvertedDistributions,
          "margin offsets leave no gap between positive and negative margins");
  return m;
}

namespace {

std::vector<LabeledItem> labeled_items(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<LabeledItem> out;
  out.reserve(idx.size());
  for (std::size_t i : idx)
    out.push_back({data.manifest.entries[i].item_id, data.manifest.entries[i].class_id, i});
  return out;
}

/// Inputs for one virtual batch: either the stored maps or jittered crops,
/// drawn sequentially so parallel execution sees the same crops.
class BatchInputs {
 public:
  BatchInputs(const Dataset& data, const TrainConfig& cfg) : data_(data), cfg_(cfg) {}

  void prepare(const std::vector<std::size_t>& sources, Rng& rng) {
    maps_.clear();
    crops_.clear();
    if (cfg_.grid_jitter) crops_.reserve(sources.size());
    for (std::size_t s : sources) {
      const FeatureMap& fm = data_.features[s];
      if (cfg_.grid_jitter) {
        crops_.push_back(jitter_crop(fm, cfg_.jitter_min_fraction, rng));
        maps_.push_back(&crops_.back());
      } else {
        maps_.push_back(&fm);
      }
    }
  }

  const FeatureMap& operator[](std::size_t slot) const { return *maps_[slot]; }

 private:
  const Dataset& data_;
  const TrainConfig& cfg_;
  std::vector<FeatureMap> crops_;
  std::vector<const FeatureMap*> maps_;
};

void step_mean(ModelParams& params, ParamGradients& grads, std::size_t used,
               OptimizerState& state) {
  if (used == 0) return;
  scale(grads, 1.0 / static_cast<double>(used));
  sgd_step(params, grads, state);
}

void zero(ParamGradients& g) {
  for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 0.0);
}

LossValue pair_loss(const TrainConfig& cfg, const MarginConfig& margins, double d, PairLabel y) {
  if (cfg.stage == Stage::RetrievalSingle) return single_margin_loss(d, y, margins.negative);
  return double_margin_loss(d, y, margins);
}

}  // namespace

TrainResult train_retrieval(const ModelParams& init, const Dataset& data, const TrainConfig& cfg,
                            Rng& rng, const EpochCallback& on_epoch) {
  require(is_retrieval(cfg.stage), ErrorCode::BadSpec, "train_retrieval needs a retrieval stage");
  cfg.validate();
  ModelParams params = without_head(init);
  params.validate();
  require(!data.queries(Split::Validation).empty() && !data.database(Split::Validation).empty(),
          ErrorCode::EmptyValidation, "retrieval training needs validation queries and database");

  const std::vector<LabeledItem> items = labeled_items(data, data.indices(Split::Train));
  TrainResult result;
  result.margins_used = cfg.margins;
  if (cfg.margin_mode == MarginMode::Suggested && cfg.stage != Stage::RetrievalTriplet) {
    Rng margin_rng = rng.fork(0x6d617267);
    result.margins_used =
        margins_from_model(params, data, cfg.margin_sample_pairs, cfg.margin_offsets, margin_rng,
                           cfg.exec);
  }
  const MarginConfig margins = result.margins_used;

  OptimizerState state = OptimizerState::fresh(params, cfg.optimizer);
  result.initial_metric = evaluate_split(params, data, Split::Validation, cfg.exec).mean_ap;
  result.best = {params, state, 0, -1.0, cfg.hash()};
  bool have_best = false;

  ParamGradients grads = zeros_like(params);
  BatchInputs inputs(data, cfg);
  std::vector<std::size_t> sources;
  const bool triplet = cfg.stage == Stage::RetrievalTriplet;
  PairBatch pairs;
  std::vector<Triplet> triplets;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    state.lr = lr_at_epoch(cfg.optimizer.lr, epoch, cfg.optimizer.decay_period,
                           cfg.optimizer.decay_factor);
    if (regeneration_due(epoch, cfg.regeneration_period)) {
      if (triplet)
        triplets = generate_triplets(items, cfg.pairs_per_class, rng);
      else
        pairs = generate_pairs(items, cfg.pairs_per_class, rng, epoch);
    } else if (triplet) {
      rng.shuffle(triplets);
    } else {
      rng.shuffle(pairs.pairs);
      pairs.epoch = epoch;
    }

    const std::size_t total = triplet ? triplets.size() : pairs.pairs.size();
    const std::size_t arity = triplet ? 3 : 2;
    double loss_sum = 0.0;
    std::size_t used_sum = 0;
    for (std::size_t begin = 0; begin < total; begin += cfg.virtual_batch) {
      const std::size_t count = std::min(cfg.virtual_batch, total - begin);
      sources.clear();
      for (std::size_t i = begin; i < begin + count; ++i) {
        if (triplet) {
          sources.push_back(items[triplets[i].anchor].source);
          sources.push_back(items[triplets[i].positive].source);
          sources.push_back(items[triplets[i].negative].source);
        } else {
          sources.push_back(items[pairs.pairs[i].first].source);
          sources.push_back(items[pairs.pairs[i].second].source);
        }
      }
      inputs.prepare(sources, rng);

      const SampleGradient sample = [&](std::size_t k, ParamGradients& acc) -> std::optional<double> {
        if (triplet) {
          const ForwardTrace ta = forward_trace(params, inputs[arity * k]);
          const ForwardTrace tp = forward_trace(params, inputs[arity * k + 1]);
          const ForwardTrace tn = forward_trace(params, inputs[arity * k + 2]);
          if (ta.embedding.empty() || tp.embedding.empty() || tn.embedding.empty())
            return std::nullopt;
          const auto ap = distance_with_grad(ta.embedding, tp.embedding);
          const auto an = distance_with_grad(ta.embedding, tn.embedding);
          const TripletValue v = triplet_loss(ap.distance, an.distance, cfg.triplet_margin);
          const std::size_t dim = ta.embedding.size();
          Vec da(dim), dp(dim), dn(dim);
          for (std::size_t i = 0; i < dim; ++i) {
            da[i] = v.grad_ap * ap.grad_first[i] + v.grad_an * an.grad_first[i];
            dp[i] = -v.grad_ap * ap.grad_first[i];
            dn[i] = -v.grad_an * an.grad_first[i];
          }
          backward_embedding(params, ta, da, acc);
          backward_embedding(params, tp, dp, acc);
          backward_embedding(params, tn, dn, acc);
          return v.loss;
        }
        const ItemPair& pr = pairs.pairs[begin + k];
        const ForwardTrace ta = forward_trace(params, inputs[2 * k]);
        const ForwardTrace tb = forward_trace(params, inputs[2 * k + 1]);
        if (ta.embedding.empty() || tb.embedding.empty()) return std::nullopt;
        const auto dg = distance_with_grad(ta.embedding, tb.embedding);
        const LossValue v = pair_loss(cfg, margins, dg.distance, pr.label);
        if (v.grad != 0.0) {
          Vec da(dg.grad_first.size());
          Vec db(dg.grad_first.size());
          for (std::size_t i = 0; i < da.size(); ++i) {
            da[i] = v.grad * dg.grad_first[i];
            db[i] = -da[i];
          }
          backward_embedding(params, ta, da, acc);
          backward_embedding(params, tb, db, acc);
        }
        return v.loss;
      };

      zero(grads);
      const GradientSum sum = accumulate_gradients(count, sample, grads, cfg.exec);
      loss_sum += sum.loss;
      used_sum += sum.used;
      step_mean(params, grads, sum.used, state);
    }

    EpochRecord rec{epoch, cfg.stage, used_sum ? loss_sum / static_cast<double>(used_sum) : 0.0,
                    state.lr, std::nullopt};
    const bool last = epoch + 1 == cfg.max_epochs;
    if ((epoch + 1) % cfg.eval_every == 0 || last) {
      const double m = evaluate_split(params, data, Split::Validation, cfg.exec).mean_ap;
      rec.metric = m;
      if (!have_best || m > result.best.best_metric) {
        result.best = {params, state, epoch, m, cfg.hash()};
        have_best = true;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult train_classification(const ModelParams& init, const Dataset& data,
                                 const TrainConfig& cfg, Rng& rng, const EpochCallback& on_epoch) {
  require(cfg.stage == Stage::Classification, ErrorCode::BadSpec,
          "train_classification needs the classification stage");
  cfg.validate();
  require(init.head.has_value(), ErrorCode::MissingHead, "classification needs a head");
  init.validate();

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : data.indices_in({Split::Train, Split::Validation}))
    by_class[data.manifest.entries[i].class_id].push_back(i);
  require(by_class.size() >= 2, ErrorCode::SingleClassDataset,
          "classification needs at least 2 classes");
  require(init.head->classes() == by_class.size(), ErrorCode::BadSpec,
          "head has " + std::to_string(init.head->classes()) + " outputs for " +
              std::to_string(by_class.size()) + " classes");

  // (source, target) examples, split within each class.
  std::vector<std::pair<std::size_t, std::size_t>> train_set;
  std::vector<std::pair<std::size_t, std::size_t>> held_out;
  std::vector<std::size_t> counts;
  std::size_t target = 0;
  for (auto& [c, members] : by_class) {
    std::vector<std::size_t> order = members;
    rng.shuffle(order);
    const std::size_t n = order.size();
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(cfg.cls_train_fraction * static_cast<double>(n)));
    n_train = n < 2 ? n : std::clamp<std::size_t>(n_train, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i)
      (i < n_train ? train_set : held_out).emplace_back(order[i], target);
    counts.push_back(n_train);
    ++target;
  }
  require(!held_out.empty(), ErrorCode::EmptyValidation, "no held-out classification items");
  const ClassWeights weights = class_weights_from_counts(counts);

  ModelParams params = init;
  OptimizerState state = OptimizerState::fresh(params, cfg.optimizer);

  const auto accuracy = [&](const ModelParams& p) {
    std::size_t correct = 0;
    for (const auto& [src, tgt] : held_out) {
      const Vec logits = forward_classify(p, data.features[src]);
      const auto best = static_cast<std::size_t>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
      correct += best == tgt ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(held_out.size());
  };

  TrainResult result;
  result.initial_metric = accuracy(params);
  result.best = {params, state, 0, -1.0, cfg.hash()};
  bool have_best = false;

  ParamGradients grads = zeros_like(params);
  BatchInputs inputs(data, cfg);
  std::vector<std::size_t> sources;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    state.lr = lr_at_epoch(cfg.optimizer.lr, epoch, cfg.optimizer.decay_period,
                           cfg.optimizer.decay_factor);
    rng.shuffle(train_set);
    double loss_sum = 0.0;
    std::size_t used_sum = 0;
    for (std::size_t begin = 0; begin < train_set.size(); begin += cfg.virtual_batch) {
      const std::size_t count = std::min(cfg.virtual_batch, train_set.size() - begin);
      sources.clear();
      for (std::size_t i = begin; i < begin + count; ++i) sources.push_back(train_set[i].first);
      inputs.prepare(sources, rng);

      const SampleGradient sample = [&](std::size_t k, ParamGradients& acc) -> std::optional<double> {
        ForwardTrace trace;
        const Vec logits = forward_classify(params, inputs[k], &trace);
        const CrossEntropyValue ce = weighted_cross_entropy(logits, train_set[begin + k].second, weights);
        backward_logits(params, trace, ce.grad, acc);
        return ce.loss;
      };
      zero(grads);
      const GradientSum sum = accumulate_gradients(count, sample, grads, cfg.exec);
      loss_sum += sum.loss;
      used_sum += sum.used;
      step_mean(params, grads, sum.used, state);
    }

    EpochRecord rec{epoch, cfg.stage, used_sum ? loss_sum / static_cast<double>(used_sum) : 0.0,
                    state.lr, std::nullopt};
    const bool last = epoch + 1 == cfg.max_epochs;
    if ((epoch + 1) % cfg.eval_every == 0 || last) {
      const double acc = accuracy(params);
      rec.metric = acc;
      if (!have_best || acc > result.best.best_metric) {
        result.best = {params, state, epoch, acc, cfg.hash()};
        have_best = true;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TwoStageResult two_stage(const ModelParams& cls_init, const Dataset& data,
                         const TrainConfig& cfg_cls, const TrainConfig& cfg_retr, Rng& rng,
                         const EpochCallback& on_epoch) {
  require(is_retrieval(cfg_retr.stage), ErrorCode::BadSpec,
          "second stage must be a retrieval stage");
  TwoStageResult r;
  r.classification = train_classification(cls_init, data, cfg_cls, rng, on_epoch);
  r.retrieval =
      train_retrieval(without_head(r.classification.best.params), data, cfg_retr, rng, on_epoch);
  return r;
}

}  // namespace dmcl
