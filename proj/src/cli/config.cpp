#include "dmcl/cli/config.hpp"

#include <fstream>

#include "dmcl/error.hpp"
#include "dmcl/io.hpp"

namespace dmcl::cli {

ConfigObject::ConfigObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
  dmcl::require(j_.is_object(), ErrorCode::SchemaError, where_ + " must be a JSON object");
}

const json& ConfigObject::raw(const std::string& key) {
  seen_.insert(key);
  if (!j_.contains(key)) missing(key);
  return j_.at(key);
}

ConfigObject ConfigObject::object(const std::string& key) {
  seen_.insert(key);
  if (!j_.contains(key)) return ConfigObject(json::object(), where_ + "." + key);
  return ConfigObject(j_.at(key), where_ + "." + key);
}

void ConfigObject::finish() const {
  for (const auto& [key, _] : j_.items())
    if (!seen_.count(key)) fail(ErrorCode::SchemaError, "unknown key '" + key + "' in " + where_);
}

void ConfigObject::missing(const std::string& key) const {
  fail(ErrorCode::SchemaError, "missing required key '" + key + "' in " + where_);
}

void ConfigObject::bad_type(const std::string& key, const std::string& detail) const {
  fail(ErrorCode::SchemaError, "bad value for '" + key + "' in " + where_ + ": " + detail);
}

json load_json(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  try {
    return json::parse(b.begin(), b.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, "cannot parse '" + path.string() + "': " + e.what());
  }
}

SyntheticSpec parse_synthetic_spec(ConfigObject& c) {
  SyntheticSpec s;
  s.classes = c.get<std::size_t>("classes", s.classes);
  s.items_min = c.get<std::size_t>("items_min", s.items_min);
  s.items_max = c.get<std::size_t>("items_max", s.items_max);
  s.channels = c.get<std::size_t>("channels", s.channels);
  s.grid_min = c.get<std::size_t>("grid_min", s.grid_min);
  s.grid_max = c.get<std::size_t>("grid_max", s.grid_max);
  s.center_spread = c.get<double>("center_spread", s.center_spread);
  s.noise = c.get<double>("noise", s.noise);
  s.nuisance = c.get<double>("nuisance", s.nuisance);
  s.nuisance_rank = c.get<std::size_t>("nuisance_rank", s.nuisance_rank);
  s.class_variation = c.get<double>("class_variation", s.class_variation);
  s.class_variation_rank = c.get<std::size_t>("class_variation_rank", s.class_variation_rank);
  s.seed = c.get<std::uint64_t>("seed", s.seed);
  return s;
}

json to_json(const SyntheticSpec& s) {
  return {{"classes", s.classes},
          {"items_min", s.items_min},
          {"items_max", s.items_max},
          {"channels", s.channels},
          {"grid_min", s.grid_min},
          {"grid_max", s.grid_max},
          {"center_spread", s.center_spread},
          {"noise", s.noise},
          {"nuisance", s.nuisance},
          {"nuisance_rank", s.nuisance_rank},
          {"class_variation", s.class_variation},
          {"class_variation_rank", s.class_variation_rank},
          {"seed", s.seed}};
}

SplitFractions parse_fractions(ConfigObject& c) {
  SplitFractions f;
  if (!c.has("fractions")) return f;
  const json& j = c.raw("fractions");
  dmcl::require(j.is_array() && j.size() == 3, ErrorCode::SchemaError,
                "fractions must be [train, validation, test]");
  try {
    f = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("fractions must be numbers: ") + e.what());
  }
  f.validate();
  return f;
}

TrainConfig parse_train_config(ConfigObject& c, Stage stage) {
  TrainConfig t;
  t.stage = stage;
  t.max_epochs = c.get<int>("epochs", t.max_epochs);
  t.virtual_batch = c.get<std::size_t>("virtual_batch", t.virtual_batch);
  t.eval_every = c.get<int>("eval_every", t.eval_every);
  t.grid_jitter = c.get<bool>("grid_jitter", t.grid_jitter);
  t.jitter_min_fraction = c.get<double>("jitter_min_fraction", t.jitter_min_fraction);
  t.optimizer.lr = c.get<double>("lr", t.optimizer.lr);
  t.optimizer.momentum = c.get<double>("momentum", t.optimizer.momentum);
  t.optimizer.weight_decay = c.get<double>("weight_decay", t.optimizer.weight_decay);
  t.optimizer.decay_factor = c.get<double>("decay_factor", t.optimizer.decay_factor);
  t.optimizer.decay_period = c.get<int>("decay_period", t.optimizer.decay_period);

  if (stage == Stage::Classification) {
    t.cls_train_fraction = c.get<double>("train_fraction", t.cls_train_fraction);
  } else {
    t.pairs_per_class = c.get<std::size_t>("pairs_per_class", t.pairs_per_class);
    t.regeneration_period = c.get<int>("regeneration_period", t.regeneration_period);
    if (stage == Stage::RetrievalTriplet) {
      t.triplet_margin = c.get<double>("triplet_margin", t.triplet_margin);
    } else {
      t.margin_sample_pairs = c.get<std::size_t>("margin_sample_pairs", t.margin_sample_pairs);
      if (c.has("margins")) {
        const json& m = c.raw("margins");
        if (m.is_string()) {
          const std::string name = m.get<std::string>();
          dmcl::require(name == "suggested" || name == "preset", ErrorCode::SchemaError,
                        "margins must be [positive, negative], \"preset\" or \"suggested\"");
          if (name == "suggested") t.margin_mode = MarginMode::Suggested;
          else t.margins = MarginConfig::preset();
        } else {
          dmcl::require(m.is_array() && m.size() == 2 && m[0].is_number() && m[1].is_number(),
                        ErrorCode::SchemaError,
                        "margins must be [positive, negative], \"preset\" or \"suggested\"");
          t.margins = {m[0].get<double>(), m[1].get<double>()};
        }
      }
      if (c.has("margin_offsets")) {
        const json& o = c.raw("margin_offsets");
        dmcl::require(o.is_array() && o.size() == 2 && o[0].is_number() && o[1].is_number(),
                      ErrorCode::SchemaError, "margin_offsets must be [positive, negative]");
        t.margin_offsets = {o[0].get<double>(), o[1].get<double>()};
      }
    }
  }
  c.finish();
  try {
    t.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, c.where() + ": " + e.what());
  }
  return t;
}

json to_json(const EvalReport& r) {
  json rank = json::object();
  for (std::size_t i = 0; i < kRankKs.size(); ++i) rank[std::to_string(kRankKs[i])] = r.rank_k[i];
  return {{"map", r.mean_ap},
          {"rank_k", rank},
          {"query_count", r.query_count},
          {"per_query_ap", r.per_query_ap}};
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"stage", std::string(to_string(r.stage))},
          {"mean_loss", r.mean_loss},
          {"lr", r.lr},
          {"validation_metric", r.metric ? json(*r.metric) : json(nullptr)}};
}

json to_json(const DistanceDistributionSummary& s) {
  return {{"polarity", std::string(to_string(s.polarity))},
          {"count", s.count},
          {"mean", s.mean},
          {"stddev", s.stddev}};
}

}  // namespace dmcl::cli
