#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "dmcl/dataset.hpp"
#include "dmcl/kernels.hpp"
#include "dmcl/losses.hpp"
#include "dmcl/model.hpp"
#include "dmcl/retrieval.hpp"
#include "dmcl/rng.hpp"

namespace dmcl {

enum class Stage { Classification, RetrievalSingle, RetrievalDouble, RetrievalTriplet };

/// "cls", "retr-s", "retr-d", "retr-t"
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
bool is_retrieval(Stage s);

struct OptimizerConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double decay_factor = 10.0;
  int decay_period = 10;
};

/// SGD with classic momentum; weight decay is folded into the gradient.
struct OptimizerState {
  ModelParams velocity;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double decay_factor = 10.0;
  int decay_period = 10;

  static OptimizerState fresh(const ModelParams& params, const OptimizerConfig& cfg);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// g' = g + wd * theta;  v = momentum * v + g';  theta -= lr * v.
/// Throws ShapeMismatch, or NonFiniteGradient before touching any state.
void sgd_step(ModelParams& params, const ParamGradients& grads, OptimizerState& state);

/// initial / factor^floor(epoch / period)
double lr_at_epoch(double initial, int epoch, int period, double factor);

enum class MarginMode {
  Fixed,      // use TrainConfig::margins as given
  Suggested,  // start from the initial model's distance means, then apply offsets
};

/// Offsets added to the suggested (positive, negative) starting margins.
struct MarginOffsets {
  double positive = -0.1;
  double negative = 0.0;
};

struct TrainConfig {
  Stage stage = Stage::RetrievalDouble;
  MarginConfig margins = MarginConfig::preset();
  MarginMode margin_mode = MarginMode::Fixed;
  MarginOffsets margin_offsets;
  std::size_t margin_sample_pairs = 20000;
  double triplet_margin = kDefaultTripletMargin;
  std::size_t virtual_batch = 64;
  int max_epochs = 30;
  std::size_t pairs_per_class = 180;
  int regeneration_period = 5;
  int eval_every = 1;
  OptimizerConfig optimizer;
  /// Random sub-window crops of each input map while training.
  bool grid_jitter = true;
  /// Smallest crop side as a fraction of the full side.
  double jitter_min_fraction = 256.0 / 384.0;
  /// Within-class train fraction for the classification stage.
  double cls_train_fraction = 0.7;
  ExecMode exec = ExecMode::Serial;

  void validate() const;
  /// FNV-1a over a canonical rendering of every field.
  std::uint64_t hash() const;
};

struct EpochRecord {
  int epoch = 0;
  Stage stage = Stage::RetrievalDouble;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::optional<double> metric;  // validation mAP or accuracy when evaluated
};

struct Checkpoint {
  ModelParams params;
  OptimizerState optimizer;
  int epoch = 0;
  double best_metric = 0.0;
  std::uint64_t config_hash = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> log;
  double initial_metric = 0.0;     // metric of the initial parameters
  MarginConfig margins_used;       // retrieval stages only
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Siamese (or triplet) training on the train split with validation-mAP model
/// selection. One pair is processed at a time; per-pair gradients are summed
/// and divided by the number of pairs before each optimizer step.
TrainResult train_retrieval(const ModelParams& init, const Dataset& data, const TrainConfig& cfg,
                            Rng& rng, const EpochCallback& on_epoch = {});

/// Weighted cross-entropy training on the train + validation classes, split
/// 70/30 within each class, with held-out-accuracy model selection.
TrainResult train_classification(const ModelParams& init, const Dataset& data,
                                 const TrainConfig& cfg, Rng& rng,
                                 const EpochCallback& on_epoch = {});

struct TwoStageResult {
  TrainResult classification;
  TrainResult retrieval;
};

/// Classification stage, then a retrieval stage initialized from the best
/// classification parameters with the head removed and a fresh optimizer.
TwoStageResult two_stage(const ModelParams& cls_init, const Dataset& data,
                         const TrainConfig& cfg_cls, const TrainConfig& cfg_retr, Rng& rng,
                         const EpochCallback& on_epoch = {});

/// Number of classes seen by the classification stage (train + validation).
std::size_t classification_class_count(const Dataset& data);

/// Queries vs database of one split.
EvalReport evaluate_split(const ModelParams& params, const Dataset& data, Split split,
                          ExecMode mode = ExecMode::Serial);

/// Distance distributions of a model's embeddings over the items of `split`.
DistanceDistributions model_distance_distributions(const ModelParams& params, const Dataset& data,
                                                   Split split, std::size_t sample_pairs,
                                                   Rng& rng, ExecMode mode = ExecMode::Serial);

/// suggest_margins on the train split plus offsets, clipped to [0, 2].
MarginConfig margins_from_model(const ModelParams& params, const Dataset& data,
                                std::size_t sample_pairs, const MarginOffsets& offsets, Rng& rng,
                                ExecMode mode = ExecMode::Serial);

/// Random sub-window of fm with sides in [ceil(min_fraction * side), side].
FeatureMap jitter_crop(const FeatureMap& fm, double min_fraction, Rng& rng);

}  // namespace dmcl
