#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "dmcl/dataset.hpp"
#include "dmcl/retrieval.hpp"
#include "dmcl/trainer.hpp"

namespace dmcl::cli {

using json = nlohmann::json;

/// Typed, strict view of one JSON object: every key must be consumed, and
/// finish() rejects whatever was not.
class ConfigObject {
 public:
  ConfigObject(const json& j, std::string where);

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) missing(key);
    return convert<T>(key);
  }

  const json& raw(const std::string& key);
  ConfigObject object(const std::string& key);
  const std::string& where() const { return where_; }

  /// Throws SchemaError naming the first unknown key.
  void finish() const;

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      bad_type(key, e.what());
    }
  }
  [[noreturn]] void missing(const std::string& key) const;
  [[noreturn]] void bad_type(const std::string& key, const std::string& detail) const;

  json j_;
  std::string where_;
  std::set<std::string> seen_;
};

json load_json(const std::filesystem::path& path);

SyntheticSpec parse_synthetic_spec(ConfigObject& c);
json to_json(const SyntheticSpec& s);
SplitFractions parse_fractions(ConfigObject& c);

/// Stage-specific training options; `stage` fixes which keys are allowed.
TrainConfig parse_train_config(ConfigObject& c, Stage stage);

json to_json(const EvalReport& r);
json to_json(const EpochRecord& r);
json to_json(const DistanceDistributionSummary& s);

}  // namespace dmcl::cli
