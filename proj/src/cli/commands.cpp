#include "dmcl/cli/commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dmcl/io.hpp"
#include "dmcl/labels.hpp"
#include "dmcl/pca.hpp"

namespace dmcl::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Schema: return kExitSchema;
    case ErrorCategory::Io: return kExitIo;
    case ErrorCategory::Numeric: return kExitNumeric;
    case ErrorCategory::Domain: return kExitDomain;
  }
  return kExitUnexpected;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Writes files under the run directory and remembers their checksums.
class RunWriter {
 public:
  explicit RunWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& rel, std::span<const std::uint8_t> bytes) {
    write_file(dir_ / rel, bytes);
    files_[rel] = {bytes.size(), fnv1a64(bytes)};
  }
  void write_text(const std::string& rel, const std::string& text) { write(rel, as_bytes(text)); }
  void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }

  void finish(const std::string& command) {
    json files = json::array();
    for (const auto& [path, info] : files_)
      files.push_back({{"path", path}, {"bytes", info.first}, {"fnv1a64", hex64(info.second)}});
    const json m = {{"command", command}, {"files", files}};
    write_file(dir_ / "run_manifest.json", as_bytes(m.dump(2) + "\n"));
  }

 private:
  fs::path dir_;
  std::map<std::string, std::pair<std::size_t, std::uint64_t>> files_;
};

fs::path resolve(const CommandContext& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

void say(const CommandContext& ctx, Verbosity level, const std::string& line) {
  if (ctx.log && static_cast<int>(ctx.verbosity) >= static_cast<int>(level)) ctx.log(line);
}

json split_summary(const Dataset& d) {
  json out = json::object();
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    out[std::string(to_string(s))] = {{"classes", d.manifest.classes(s).size()},
                                      {"items", d.indices(s).size()},
                                      {"queries", d.queries(s).size()}};
  }
  return out;
}

std::vector<int> labels_of(const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(d.manifest.entries[i].class_id);
  return out;
}

Mat normalize_rows(Mat m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Vec v(m.row(r).begin(), m.row(r).end());
    v = l2_normalize(v);
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

Mat project_rows(const PcaModel& pca, const Mat& m, bool renormalize) {
  Mat out(m.rows(), pca.components.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Vec v = pca_apply(pca, m.row(r));
    if (renormalize) v = l2_normalize(v);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

std::vector<Stage> parse_stages(const std::string& s) {
  std::vector<Stage> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = s.find('+', start);
    const std::string part = s.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    try {
      out.push_back(parse_stage(part));
    } catch (const Error&) {
      fail(ErrorCode::SchemaError, "unknown stage '" + part + "' in '" + s + "'");
    }
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  const bool ok = (out.size() == 1) ||
                  (out.size() == 2 && out[0] == Stage::Classification && is_retrieval(out[1]));
  require(ok, ErrorCode::SchemaError,
          "stages must be one stage or cls+<retrieval stage>, got '" + s + "'");
  return out;
}

std::vector<std::size_t> parse_dims(ConfigObject& c, const std::string& key,
                                    std::vector<std::size_t> fallback) {
  auto dims = c.get<std::vector<std::size_t>>(key, fallback);
  require(!dims.empty(), ErrorCode::SchemaError, key + " must not be empty");
  for (std::size_t d : dims) require(d >= 1, ErrorCode::SchemaError, key + " entries must be positive");
  return dims;
}

const std::vector<std::size_t> kDefaultHiddenDims = {32, 64};

json result_summary(const TrainResult& r) {
  json j = {{"best_epoch", r.best.epoch},
            {"best_metric", r.best.best_metric},
            {"initial_metric", r.initial_metric},
            {"epochs_run", r.log.size()}};
  return j;
}

}  // namespace

json cmd_synth(const json& config, const CommandContext& ctx) {
  ConfigObject c(config, "synth config");
  const SyntheticSpec spec = parse_synthetic_spec(c);
  const SplitFractions fractions = parse_fractions(c);
  c.finish();
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, e.what());
  }

  const Dataset data = make_synthetic_dataset(spec, fractions);
  RunWriter out(ctx.out_dir);
  out.write_json("config.json", config);
  out.write_json("synthetic_spec.json", to_json(spec));
  out.write_text("manifest.tsv", encode_manifest(data.manifest));
  for (std::size_t i = 0; i < data.features.size(); ++i)
    out.write(data.manifest.entries[i].feature_path, encode_feature_map(data.features[i]));

  json summary = {{"items", data.manifest.entries.size()},
                  {"classes", spec.classes},
                  {"channels", spec.channels},
                  {"splits", split_summary(data)},
                  {"rng", std::string(Rng::kAlgorithm)}};
  out.write_json("summary.json", summary);
  out.finish("synth");
  say(ctx, Verbosity::Verbose, "wrote " + std::to_string(data.features.size()) + " feature maps");
  return summary;
}

json cmd_train(const json& config, const CommandContext& ctx) {
  ConfigObject c(config, "train config");
  const fs::path manifest = resolve(ctx, c.require<std::string>("manifest"));
  const auto seed = c.get<std::uint64_t>("seed", 0);
  const std::vector<Stage> stages = parse_stages(c.get<std::string>("stages", "cls+retr-d"));
  const bool parallel = c.get<bool>("parallel", false);
  const bool has_cls = stages.front() == Stage::Classification;
  const Stage last = stages.back();
  const bool has_retr = is_retrieval(last);

  std::optional<fs::path> init_checkpoint;
  if (c.has("init_checkpoint")) {
    require(!has_cls && has_retr, ErrorCode::SchemaError,
            "init_checkpoint is only allowed with a single retrieval stage");
    require(!c.has("hidden_dims"), ErrorCode::SchemaError,
            "hidden_dims cannot be combined with init_checkpoint");
    init_checkpoint = resolve(ctx, c.require<std::string>("init_checkpoint"));
  }
  const auto hidden = init_checkpoint ? std::vector<std::size_t>{}
                                      : parse_dims(c, "hidden_dims", kDefaultHiddenDims);

  std::optional<TrainConfig> cls_cfg, retr_cfg;
  if (has_cls) {
    ConfigObject o = c.object("classification");
    cls_cfg = parse_train_config(o, Stage::Classification);
  } else {
    require(!c.has("classification"), ErrorCode::SchemaError,
            "classification options given without a cls stage");
  }
  if (has_retr) {
    ConfigObject o = c.object("retrieval");
    retr_cfg = parse_train_config(o, last);
  } else {
    require(!c.has("retrieval"), ErrorCode::SchemaError,
            "retrieval options given without a retrieval stage");
  }
  c.finish();
  const ExecMode mode = parallel ? ExecMode::Parallel : ExecMode::Serial;
  if (cls_cfg) cls_cfg->exec = mode;
  if (retr_cfg) retr_cfg->exec = mode;

  const Dataset data = load_dataset(manifest);
  require(!data.features.empty(), ErrorCode::SchemaError, "manifest lists no items");

  Rng root(seed);
  ModelParams init;
  if (init_checkpoint) {
    init = without_head(load_checkpoint(*init_checkpoint).params);
  } else {
    std::vector<std::size_t> dims{data.features.front().channels()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    Rng init_rng = root.fork(1);
    init = init_params(dims, init_rng,
                       has_cls ? std::optional(classification_class_count(data)) : std::nullopt);
  }
  Rng train_rng = root.fork(2);

  std::string log;
  const EpochCallback on_epoch = [&](const EpochRecord& r) {
    const std::string line = to_json(r).dump();
    log += line + "\n";
    say(ctx, Verbosity::Verbose, line);
  };

  json summary = {{"stages", json::array()}, {"rng", std::string(Rng::kAlgorithm)}};
  RunWriter out(ctx.out_dir);
  out.write_json("config.json", config);
  auto record = [&](const TrainResult& r, Stage s, const std::string& file) {
    json j = result_summary(r);
    j["stage"] = std::string(to_string(s));
    j["checkpoint"] = file;
    if (is_retrieval(s) && s != Stage::RetrievalTriplet)
      j["margins"] = {r.margins_used.positive, r.margins_used.negative};
    summary["stages"].push_back(j);
    out.write(file, encode_checkpoint(r.best));
  };

  if (has_cls && retr_cfg) {
    const TwoStageResult r = two_stage(init, data, *cls_cfg, *retr_cfg, train_rng, on_epoch);
    record(r.classification, Stage::Classification, "cls.ckpt");
    record(r.retrieval, last, "retr.ckpt");
  } else if (has_cls) {
    record(train_classification(init, data, *cls_cfg, train_rng, on_epoch), Stage::Classification,
           "cls.ckpt");
  } else {
    record(train_retrieval(init, data, *retr_cfg, train_rng, on_epoch), last, "retr.ckpt");
  }
  out.write_text("train_log.jsonl", log);
  out.write_json("summary.json", summary);
  out.finish("train");
  return summary;
}

json cmd_eval(const json& config, const CommandContext& ctx) {
  ConfigObject c(config, "eval config");
  const fs::path manifest = resolve(ctx, c.require<std::string>("manifest"));
  const std::string features = c.get<std::string>("features", "model");
  require(features == "model" || features == "mac" || features == "spoc", ErrorCode::SchemaError,
          "features must be model, mac or spoc");
  std::optional<fs::path> checkpoint;
  if (features == "model") {
    checkpoint = resolve(ctx, c.require<std::string>("checkpoint"));
  } else {
    require(!c.has("checkpoint"), ErrorCode::SchemaError,
            "checkpoint is only used with features = model");
  }
  Split split;
  try {
    split = parse_split(c.get<std::string>("split", "test"));
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  const auto pca_dims = c.get<std::vector<std::size_t>>("pca_dims", {});
  const bool renormalize = c.get<bool>("renormalize", true);
  const bool parallel = c.get<bool>("parallel", false);
  c.finish();
  const ExecMode mode = parallel ? ExecMode::Parallel : ExecMode::Serial;

  const Dataset data = load_dataset(manifest);
  const auto db_idx = data.database(split);
  const auto q_idx = data.queries(split);
  require(!q_idx.empty(), ErrorCode::SchemaError,
          "split '" + std::string(to_string(split)) + "' has no queries");

  Mat db, q;
  if (checkpoint) {
    const ModelParams params = without_head(load_checkpoint(*checkpoint).params);
    db = embed_items(params, data.features, db_idx, mode);
    q = embed_items(params, data.features, q_idx, mode);
  } else {
    const Pooling pooling = features == "mac" ? Pooling::Mac : Pooling::Spoc;
    db = normalize_rows(pool_items(data.features, db_idx, pooling, mode));
    q = normalize_rows(pool_items(data.features, q_idx, pooling, mode));
  }
  const std::size_t dim = db.cols();
  for (std::size_t d : pca_dims)
    require(d >= 1 && d <= dim, ErrorCode::SchemaError,
            "pca dim " + std::to_string(d) + " outside [1, " + std::to_string(dim) + "]");

  const auto db_labels = labels_of(data, db_idx);
  const auto q_labels = labels_of(data, q_idx);
  const EvalReport base =
      evaluate(RetrievalIndex::build(db, db_labels), q, q_labels, mode);

  json entries = json::array();
  for (std::size_t d : pca_dims) {
    const PcaModel pca = pca_fit(db, d, d == dim ? RankPolicy::AllowPadding : RankPolicy::Strict);
    const EvalReport r = evaluate_vectors(project_rows(pca, db, renormalize), db_labels,
                                          project_rows(pca, q, renormalize), q_labels, mode);
    entries.push_back({{"dim", d}, {"report", to_json(r)}});
    say(ctx, Verbosity::Verbose, "pca " + std::to_string(d) + ": map " + std::to_string(r.mean_ap));
  }

  json report = {{"split", std::string(to_string(split))},
                 {"features", features},
                 {"dim", dim},
                 {"database_count", db_idx.size()},
                 {"renormalize", renormalize},
                 {"no_pca", to_json(base)},
                 {"pca", entries}};
  RunWriter out(ctx.out_dir);
  out.write_json("config.json", config);
  out.write_json("eval.json", report);
  out.finish("eval");
  return report;
}

json cmd_analyze(const json& config, const CommandContext& ctx) {
  ConfigObject c(config, "analyze config");
  const fs::path manifest = resolve(ctx, c.require<std::string>("manifest"));
  std::optional<fs::path> checkpoint;
  std::vector<std::size_t> hidden;
  std::uint64_t init_seed = 0;
  if (c.has("checkpoint")) {
    require(!c.has("untrained"), ErrorCode::SchemaError,
            "give either checkpoint or untrained, not both");
    checkpoint = resolve(ctx, c.require<std::string>("checkpoint"));
  } else {
    require(c.has("untrained"), ErrorCode::SchemaError, "analyze needs checkpoint or untrained");
    ConfigObject u = c.object("untrained");
    hidden = parse_dims(u, "hidden_dims", kDefaultHiddenDims);
    init_seed = u.get<std::uint64_t>("seed", 0);
    u.finish();
  }
  Split split;
  try {
    split = parse_split(c.get<std::string>("split", "train"));
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  const auto sample_pairs = c.get<std::size_t>("sample_pairs", 20000);
  require(sample_pairs >= 1, ErrorCode::SchemaError, "sample_pairs must be positive");
  const auto seed = c.get<std::uint64_t>("seed", 0);
  const auto offsets = c.get<std::vector<double>>("margin_offsets", {-0.1, 0.0});
  require(offsets.size() == 2, ErrorCode::SchemaError, "margin_offsets must be [positive, negative]");
  const bool parallel = c.get<bool>("parallel", false);
  c.finish();

  const Dataset data = load_dataset(manifest);
  require(!data.features.empty(), ErrorCode::SchemaError, "manifest lists no items");
  ModelParams params;
  if (checkpoint) {
    params = without_head(load_checkpoint(*checkpoint).params);
  } else {
    // Same initialization as cmd_train with this seed and hidden_dims.
    std::vector<std::size_t> dims{data.features.front().channels()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    Rng init_rng = Rng(init_seed).fork(1);
    params = init_params(dims, init_rng);
  }

  Rng rng(seed);
  const DistanceDistributions dd = model_distance_distributions(
      params, data, split, sample_pairs, rng, parallel ? ExecMode::Parallel : ExecMode::Serial);

  std::ostringstream csv;
  csv << "bin_left,bin_right,count,polarity\n";
  for (const auto* s : {&dd.positive, &dd.negative}) {
    for (std::size_t b = 0; b < s->counts.size(); ++b) {
      char line[96];
      std::snprintf(line, sizeof line, "%.4f,%.4f,%zu,%s\n", s->bin_edges[b], s->bin_edges[b + 1],
                    s->counts[b], std::string(to_string(s->polarity)).c_str());
      csv << line;
    }
  }

  RunWriter out(ctx.out_dir);
  out.write_json("config.json", config);
  out.write_text("distances.csv", csv.str());
  json result = {{"split", std::string(to_string(split))},
                 {"rng", std::string(Rng::kAlgorithm)},
                 {"positive", to_json(dd.positive)},
                 {"negative", to_json(dd.negative)}};
  try {
    const MarginConfig m = suggest_margins(dd.positive, dd.negative);
    result["suggested"] = {m.positive, m.negative};
    result["with_offsets"] = {std::clamp(m.positive + offsets[0], 0.0, kHistogramMax),
                              std::clamp(m.negative + offsets[1], 0.0, kHistogramMax)};
  } catch (const Error&) {
    out.write_json("margins.json", result);
    out.finish("analyze");
    throw;
  }
  out.write_json("margins.json", result);
  out.finish("analyze");
  return result;
}

json cmd_labels(const json& config, const CommandContext& ctx) {
  ConfigObject c(config, "labels config");
  const fs::path labels = resolve(ctx, c.require<std::string>("labels"));
  LabelerWeights weights = LabelerWeights::reference();
  weights.values = c.get<std::vector<double>>("weights", weights.values);
  const double threshold = c.get<double>("threshold", kDefaultScoreThreshold);
  c.finish();
  try {
    weights.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, e.what());
  }

  const Bytes raw = read_file(labels);
  const auto records = decode_label_records(std::string(raw.begin(), raw.end()));
  for (const auto& r : records) r.validate(weights.values.size());
  const auto kept_ids = filter_valid(records, weights, threshold);
  const auto quality = labeler_quality(records);

  std::vector<RawLabelRecord> kept;
  std::size_t k = 0;
  for (const auto& r : records)
    if (k < kept_ids.size() && r.item_id == kept_ids[k]) {
      kept.push_back(r);
      ++k;
    }
  std::ostringstream table;
  table << "labeler\tlowest_correlation_classes\n";
  for (std::size_t i = 0; i < quality.size(); ++i) table << i << '\t' << quality[i] << '\n';
  std::ostringstream scores;
  scores << "item_id\tclass_id\tscore\tretained\n";
  std::size_t j = 0;
  for (const auto& r : records) {
    const bool kept_here = j < kept_ids.size() && r.item_id == kept_ids[j];
    if (kept_here) ++j;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", aggregate_score(r, weights));
    scores << r.item_id << '\t' << r.class_id << '\t' << buf << '\t' << (kept_here ? 1 : 0) << '\n';
  }

  RunWriter out(ctx.out_dir);
  out.write_json("config.json", config);
  out.write_text("retained.tsv", encode_label_records(kept));
  out.write_text("scores.tsv", scores.str());
  out.write_text("labeler_quality.tsv", table.str());
  const json summary = {{"records", records.size()},
                        {"retained", kept.size()},
                        {"threshold", threshold},
                        {"labeler_quality", quality}};
  out.write_json("summary.json", summary);
  out.finish("labels");
  return summary;
}

int run_tool(int argc, char** argv) {
  CLI::App app{"Metric-learning retrieval experiments on feature-map datasets"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  bool verbose = false, quiet = false;

  using Command = json (*)(const json&, const CommandContext&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"synth", "Generate a synthetic feature-map dataset", cmd_synth},
      {"train", "Train classification and/or retrieval stages", cmd_train},
      {"eval", "Evaluate retrieval mAP and rank-k, optionally after PCA", cmd_eval},
      {"analyze", "Emit pair distance distributions and suggested margins", cmd_analyze},
      {"labels", "Aggregate labeler scores and rate labelers", cmd_labels},
  };
  for (const auto& [name, help, _] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON config file")->required();
    sub->add_option("-o,--out", out_dir, "Run directory for outputs")->required();
    sub->add_flag("-v,--verbose", verbose, "Print progress to stderr");
    sub->add_flag("-q,--quiet", quiet, "Do not print the summary");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitSchema;
  }

  try {
    CommandContext ctx;
    ctx.out_dir = out_dir;
    ctx.base_dir = fs::path(config_path).parent_path();
    if (ctx.base_dir.empty()) ctx.base_dir = ".";
    ctx.verbosity = quiet ? Verbosity::Quiet : verbose ? Verbosity::Verbose : Verbosity::Normal;
    ctx.log = [](const std::string& line) { std::cerr << line << '\n'; };
    const json config = load_json(config_path);
    for (const auto& [name, _, fn] : commands) {
      if (!app.got_subcommand(name)) continue;
      const json summary = fn(config, ctx);
      if (!quiet) std::cout << summary.dump(2) << '\n';
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.category()) << "): " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

}  // namespace dmcl::cli
