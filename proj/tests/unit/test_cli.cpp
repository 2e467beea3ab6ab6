#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmcl/cli/commands.hpp"
#include "dmcl/io.hpp"
#include "dmcl/labels.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dmcl;
using namespace dmcl::cli;
using testutil::error_code_of;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dmcl_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CommandContext ctx_for(const fs::path& out) {
  CommandContext c;
  c.out_dir = out;
  c.base_dir = "/";
  c.verbosity = Verbosity::Quiet;
  return c;
}

json small_synth_config(std::uint64_t seed = 1) {
  const SyntheticSpec s = testutil::small_spec(seed);
  json j = to_json(s);
  j["fractions"] = {0.5, 0.25, 0.25};
  return j;
}

/// Synthetic dataset written once per process.
const fs::path& synth_dir() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("synth_shared");
    cmd_synth(small_synth_config(), ctx_for(d));
    return d;
  }();
  return dir;
}

json quick_train_config(const std::string& stages) {
  json j = {{"manifest", (synth_dir() / "manifest.tsv").string()},
            {"seed", 3},
            {"stages", stages},
            {"hidden_dims", {8, 8}}};
  if (stages.rfind("cls", 0) == 0)
    j["classification"] = {{"epochs", 3}, {"lr", 0.05}, {"virtual_batch", 16}, {"decay_period", 2}};
  if (stages.find("retr") != std::string::npos)
    j["retrieval"] = {{"epochs", 2}, {"lr", 0.05}, {"pairs_per_class", 12}, {"virtual_batch", 16},
                      {"margins", "preset"}};
  return j;
}

std::string slurp(const fs::path& p) {
  const Bytes b = read_file(p);
  return {b.begin(), b.end()};
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "dmcl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_tool(static_cast<int>(argv.size()), argv.data());
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("synth writes a parseable dataset and a run manifest") {
  const fs::path& d = synth_dir();
  const Dataset data = load_dataset(d / "manifest.tsv");
  CHECK(data.manifest.classes(Split::Train).size() == 2);
  CHECK(data.manifest.classes(Split::Test).size() == 2);
  const json run = json::parse(slurp(d / "run_manifest.json"));
  CHECK(run["command"] == "synth");
  bool saw_manifest = false;
  for (const auto& f : run["files"]) {
    const Bytes b = read_file(d / f["path"].get<std::string>());
    CHECK(f["bytes"].get<std::size_t>() == b.size());
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(b)));
    CHECK(f["fnv1a64"].get<std::string>() == hex);
    saw_manifest = saw_manifest || f["path"] == "manifest.tsv";
  }
  CHECK(saw_manifest);
  const json spec = json::parse(slurp(d / "synthetic_spec.json"));
  CHECK(spec["classes"] == 6);
}

TEST_CASE("synth is deterministic") {
  const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  cmd_synth(small_synth_config(7), ctx_for(a));
  cmd_synth(small_synth_config(7), ctx_for(b));
  CHECK(slurp(a / "run_manifest.json") == slurp(b / "run_manifest.json"));
  const Dataset da = load_dataset(a / "manifest.tsv");
  for (const auto& e : da.manifest.entries) CHECK(read_file(a / e.feature_path) == read_file(b / e.feature_path));
}

TEST_CASE("config schemas reject bad input") {
  const fs::path out = fresh_dir("schema");
  json bad = small_synth_config();
  bad["fractions"] = {0.5, 0.5, 0.5};
  CHECK(error_code_of([&] { cmd_synth(bad, ctx_for(out)); }) == ErrorCode::SchemaError);
  bad = small_synth_config();
  bad["colour"] = "red";
  CHECK(error_code_of([&] { cmd_synth(bad, ctx_for(out)); }) == ErrorCode::SchemaError);
  bad = small_synth_config();
  bad["classes"] = "many";
  CHECK(error_code_of([&] { cmd_synth(bad, ctx_for(out)); }) == ErrorCode::SchemaError);
  bad = small_synth_config();
  bad["items_min"] = 50;
  CHECK(error_code_of([&] { cmd_synth(bad, ctx_for(out)); }) == ErrorCode::SchemaError);
  CHECK(fs::is_empty(out));

  json t = quick_train_config("cls+retr-d");
  t["retrieval"]["lr_typo"] = 0.1;
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  t = quick_train_config("retr-d");
  t["classification"] = json::object();
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  t = quick_train_config("retr-t");
  t["retrieval"].erase("margins");
  t["retrieval"]["margins"] = {0.5, 1.0};
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  t = quick_train_config("retr-d+cls");
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  t = quick_train_config("retr-d");
  t["retrieval"]["margins"] = "tuned";
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  t["retrieval"]["margins"] = {1.2, 0.8};
  CHECK(error_code_of([&] { cmd_train(t, ctx_for(out)); }) == ErrorCode::SchemaError);
  CHECK(fs::is_empty(out));
}

TEST_CASE("train writes checkpoints and a JSON-lines log") {
  const fs::path out = fresh_dir("train_two");
  const json summary = cmd_train(quick_train_config("cls+retr-d"), ctx_for(out));
  CHECK(summary["stages"].size() == 2);
  CHECK(summary["stages"][1]["margins"] == json({0.8, 1.2}));
  const Checkpoint cls = load_checkpoint(out / "cls.ckpt");
  const Checkpoint retr = load_checkpoint(out / "retr.ckpt");
  CHECK(cls.params.head.has_value());
  CHECK_FALSE(retr.params.head.has_value());

  std::istringstream log(slurp(out / "train_log.jsonl"));
  std::string line;
  std::vector<json> rows;
  while (std::getline(log, line)) rows.push_back(json::parse(line));
  REQUIRE(rows.size() == 5);
  double prev_lr = 1e9;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rows[i]["stage"] == "cls");
    CHECK(rows[i]["epoch"] == i);
    CHECK(rows[i]["lr"].get<double>() <= prev_lr);
    prev_lr = rows[i]["lr"].get<double>();
    CHECK(rows[i].contains("mean_loss"));
    CHECK(rows[i].contains("validation_metric"));
  }
  CHECK(rows[2]["lr"].get<double>() == doctest::Approx(0.005));
  CHECK(rows[3]["stage"] == "retr-d");
}

TEST_CASE("identical train invocations produce identical outputs") {
  const fs::path a = fresh_dir("train_a"), b = fresh_dir("train_b");
  const json cfg = quick_train_config("cls+retr-s");
  cmd_train(cfg, ctx_for(a));
  cmd_train(cfg, ctx_for(b));
  for (const char* f : {"cls.ckpt", "retr.ckpt", "train_log.jsonl", "run_manifest.json", "summary.json"})
    CHECK(read_file(a / f) == read_file(b / f));
}

TEST_CASE("retrieval from a checkpoint and suggested margins") {
  const fs::path first = fresh_dir("train_cls");
  cmd_train(quick_train_config("cls"), ctx_for(first));
  json cfg = quick_train_config("retr-d");
  cfg.erase("hidden_dims");
  cfg["init_checkpoint"] = (first / "cls.ckpt").string();
  cfg["retrieval"]["margins"] = "suggested";
  const fs::path out = fresh_dir("train_retr");
  const json summary = cmd_train(cfg, ctx_for(out));
  const auto m = summary["stages"][0]["margins"];
  CHECK(m[0].get<double>() < m[1].get<double>());

  cfg["hidden_dims"] = {4};
  CHECK(error_code_of([&] { cmd_train(cfg, ctx_for(out)); }) == ErrorCode::SchemaError);
}

TEST_CASE("eval reports with and without PCA") {
  const fs::path tr = fresh_dir("eval_train");
  cmd_train(quick_train_config("retr-d"), ctx_for(tr));
  const fs::path out = fresh_dir("eval");
  json cfg = {{"manifest", (synth_dir() / "manifest.tsv").string()},
              {"checkpoint", (tr / "retr.ckpt").string()},
              {"pca_dims", {4, 2}}};
  const json r = cmd_eval(cfg, ctx_for(out));
  CHECK(r["pca"].size() == 2);
  for (const auto& e : r["pca"]) {
    const double m = e["report"]["map"].get<double>();
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
  CHECK(json::parse(slurp(out / "eval.json")) == r);

  // Full-rank PCA without the final re-normalization is a rigid motion.
  json mac_cfg = {{"manifest", (synth_dir() / "manifest.tsv").string()},
                 {"features", "mac"},
                 {"pca_dims", {6}},
                 {"renormalize", false}};
  const json full = cmd_eval(mac_cfg, ctx_for(out));
  const auto& a = full["no_pca"];
  const auto& b = full["pca"][0]["report"];
  CHECK(std::abs(a["map"].get<double>() - b["map"].get<double>()) <= 1e-9);
  CHECK(a["rank_k"] == b["rank_k"]);

  cfg["pca_dims"] = {9};
  CHECK(error_code_of([&] { cmd_eval(cfg, ctx_for(out)); }) == ErrorCode::SchemaError);

  // The model's test database has rank below 8: the full-dimension rotation
  // still applies, a truncation above the rank does not.
  cfg["pca_dims"] = {8};
  cfg["renormalize"] = false;
  const json rot = cmd_eval(cfg, ctx_for(out));
  CHECK(std::abs(rot["pca"][0]["report"]["map"].get<double>() - rot["no_pca"]["map"].get<double>()) <= 1e-9);
  cfg["pca_dims"] = {7};
  CHECK(error_code_of([&] { cmd_eval(cfg, ctx_for(out)); }) == ErrorCode::RankDeficient);

  json base = {{"manifest", (synth_dir() / "manifest.tsv").string()}, {"features", "mac"}, {"split", "validation"}};
  const json mac = cmd_eval(base, ctx_for(out));
  CHECK(mac["dim"] == 6);
  base["checkpoint"] = "x";
  CHECK(error_code_of([&] { cmd_eval(base, ctx_for(out)); }) == ErrorCode::SchemaError);
}

TEST_CASE("analyze emits histograms and margins") {
  const fs::path out = fresh_dir("analyze");
  const json cfg = {{"manifest", (synth_dir() / "manifest.tsv").string()},
                    {"untrained", {{"hidden_dims", {8, 8}}, {"seed", 3}}},
                    {"sample_pairs", 2000}};
  const json r = cmd_analyze(cfg, ctx_for(out));
  CHECK(r["positive"]["count"] == 2000);
  CHECK(r["suggested"][0].get<double>() == doctest::Approx(r["positive"]["mean"].get<double>()));
  CHECK(r["with_offsets"][0].get<double>() ==
        doctest::Approx(std::max(0.0, r["positive"]["mean"].get<double>() - 0.1)));
  CHECK(r["with_offsets"][1] == r["suggested"][1]);
  std::istringstream csv(slurp(out / "distances.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "bin_left,bin_right,count,polarity");
  std::size_t rows = 0, pos_total = 0;
  while (std::getline(csv, line)) {
    ++rows;
    if (line.find(",positive") != std::string::npos)
      pos_total += std::stoul(line.substr(line.find(',', line.find(',') + 1) + 1));
  }
  CHECK(rows == 2 * kHistogramBins);
  CHECK(pos_total == 2000);
}

TEST_CASE("analyze surfaces inverted distributions") {
  // Two classes that each hold both basis directions: same-class pairs sit at
  // sqrt(2) while half of the cross-class pairs coincide.
  const fs::path data = fresh_dir("inverted_data");
  Dataset d;
  const double e[2][2] = {{1, 0}, {0, 1}};
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i) {
      const std::string id = "c" + std::to_string(c) + "_" + std::to_string(i);
      d.manifest.entries.push_back({id, c, Split::Train, false, "features/" + id + ".fmv"});
      d.features.emplace_back(1, 1, 2, std::vector<double>{e[i % 2][0], e[i % 2][1]});
    }
  save_dataset(data, d);
  Checkpoint ck;
  ck.params.layers.push_back({Mat(2, 2, Vec{1, 0, 0, 1}), Vec{0, 0}});
  ck.optimizer = OptimizerState::fresh(ck.params, OptimizerConfig{});
  save_checkpoint(data / "identity.ckpt", ck);

  const json cfg = {{"manifest", (data / "manifest.tsv").string()},
                    {"checkpoint", (data / "identity.ckpt").string()},
                    {"sample_pairs", 500}};
  const fs::path out = fresh_dir("inverted");
  CHECK(error_code_of([&] { cmd_analyze(cfg, ctx_for(out)); }) == ErrorCode::InvertedDistributions);
  CHECK(fs::exists(out / "distances.csv"));

  write_text(data / "cfg.json", cfg.dump());
  CHECK(run_args({"analyze", "-q", "-c", (data / "cfg.json").string(), "-o", out.string()}) == kExitDomain);
}

TEST_CASE("labels command") {
  const fs::path in = fresh_dir("labels_in");
  const std::string text = encode_label_records(testutil::hand_label_fixture());
  write_text(in / "labels.tsv", text);
  const fs::path out = fresh_dir("labels_out");
  json cfg = {{"labels", (in / "labels.tsv").string()}};
  const json r = cmd_labels(cfg, ctx_for(out));
  CHECK(r["retained"] == 4);
  const auto kept = decode_label_records(slurp(out / "retained.tsv"));
  std::vector<std::string> ids;
  for (const auto& k : kept) ids.push_back(k.item_id);
  CHECK(ids == testutil::kHandRetained);
  CHECK(r["labeler_quality"].size() == 5);

  cfg["threshold"] = 10;
  CHECK(cmd_labels(cfg, ctx_for(out))["retained"] == 0);
  cfg["threshold"] = 0;
  CHECK(cmd_labels(cfg, ctx_for(out))["retained"] == 7);
  cfg["weights"] = {1, 1};
  CHECK(error_code_of([&] { cmd_labels(cfg, ctx_for(out)); }) == ErrorCode::SchemaError);
}

TEST_CASE("tool exit codes") {
  const fs::path dir = fresh_dir("exit");
  write_text(dir / "ok.json", small_synth_config().dump());
  CHECK(run_args({"synth", "-q", "-c", (dir / "ok.json").string(), "-o", (dir / "run").string()}) == kExitOk);
  CHECK(fs::exists(dir / "run" / "manifest.tsv"));

  json bad = small_synth_config();
  bad["fractions"] = {0.9, 0.9, 0.9};
  write_text(dir / "bad.json", bad.dump());
  CHECK(run_args({"synth", "-q", "-c", (dir / "bad.json").string(), "-o", (dir / "x").string()}) == kExitSchema);
  write_text(dir / "broken.json", "{ not json");
  CHECK(run_args({"synth", "-q", "-c", (dir / "broken.json").string(), "-o", (dir / "x").string()}) == kExitSchema);
  CHECK(run_args({"synth", "-q", "-c", (dir / "missing.json").string(), "-o", (dir / "x").string()}) == kExitIo);
  CHECK(run_args({"frobnicate"}) == kExitSchema);
  CHECK(run_args({"synth", "-c", (dir / "ok.json").string()}) == kExitSchema);

  // Relative paths resolve against the config file's directory.
  write_text(dir / "eval.json", json({{"manifest", "run/manifest.tsv"}, {"features", "spoc"}}).dump());
  CHECK(run_args({"eval", "-q", "-c", (dir / "eval.json").string(), "-o", (dir / "ev").string()}) == kExitOk);
  write_text(dir / "eval_missing.json", json({{"manifest", "nowhere/manifest.tsv"}, {"features", "spoc"}}).dump());
  CHECK(run_args({"eval", "-q", "-c", (dir / "eval_missing.json").string(), "-o", (dir / "ev").string()}) == kExitIo);

  CHECK(exit_code_for(ErrorCategory::Numeric) == kExitNumeric);
  const std::set<int> codes{kExitOk, kExitSchema, kExitIo, kExitNumeric, kExitDomain, kExitUnexpected};
  CHECK(codes.size() == 6);
}
