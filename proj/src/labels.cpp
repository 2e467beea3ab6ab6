#include "dmcl/labels.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "dmcl/error.hpp"

namespace dmcl {

void RawLabelRecord::validate(std::size_t labelers) const {
  require(scores.size() == labelers, ErrorCode::SchemaError,
          "item '" + item_id + "' has " + std::to_string(scores.size()) + " scores, expected " +
              std::to_string(labelers));
  for (int s : scores)
    require(s >= 0 && s <= kMaxScore, ErrorCode::SchemaError,
            "item '" + item_id + "' has score " + std::to_string(s) + " outside [0, 9]");
}

void LabelerWeights::validate() const {
  double sum = 0.0;
  for (double w : values) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::SchemaError,
            "labeler weights must be finite and non-negative");
    sum += w;
  }
  require(sum > 0.0, ErrorCode::SchemaError, "labeler weights must have a positive sum");
}

LabelerWeights LabelerWeights::reference() { return {{0.445, 0.0, 0.445, 0.055, 0.055}}; }

double aggregate_score(const RawLabelRecord& r, const LabelerWeights& w) {
  r.validate(w.values.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.values.size(); ++i) s += w.values[i] * r.scores[i];
  return s;
}

std::vector<std::string> filter_valid(const std::vector<RawLabelRecord>& records,
                                      const LabelerWeights& w, double threshold) {
  w.validate();
  std::vector<std::string> out;
  for (const auto& r : records)
    if (aggregate_score(r, w) >= threshold) out.push_back(r.item_id);
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorCode::InsufficientSamples,
          "correlation needs two equal-length series of at least 2 values");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::size_t> labeler_quality(const std::vector<RawLabelRecord>& records) {
  require(!records.empty(), ErrorCode::InsufficientSamples, "no label records");
  const std::size_t labelers = records.front().scores.size();
  require(labelers >= 3, ErrorCode::SchemaError, "labeler quality needs at least 3 labelers");
  std::map<int, std::vector<const RawLabelRecord*>> by_class;
  for (const auto& r : records) {
    r.validate(labelers);
    by_class[r.class_id].push_back(&r);
  }

  std::vector<std::size_t> counts(labelers, 0);
  for (const auto& [c, members] : by_class) {
    require(members.size() >= 2, ErrorCode::InsufficientSamples,
            "class " + std::to_string(c) + " has fewer than 2 labeled items");
    std::vector<std::vector<double>> series(labelers);
    for (const auto* r : members)
      for (std::size_t l = 0; l < labelers; ++l) series[l].push_back(r->scores[l]);

    std::vector<double> avg(labelers, 0.0);
    for (std::size_t i = 0; i < labelers; ++i)
      for (std::size_t j = i + 1; j < labelers; ++j) {
        const double r = pearson(series[i], series[j]);
        avg[i] += r;
        avg[j] += r;
      }
    double lowest = avg[0] /= static_cast<double>(labelers - 1);
    for (std::size_t l = 1; l < labelers; ++l) {
      avg[l] /= static_cast<double>(labelers - 1);
      lowest = std::min(lowest, avg[l]);
    }
    for (std::size_t l = 0; l < labelers; ++l)
      if (avg[l] - lowest <= 1e-12) ++counts[l];
  }
  return counts;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

int parse_score(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  int v = -1;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(!s.empty() && used == s.size(), ErrorCode::SchemaError,
          where + ": bad integer '" + s + "'");
  return v;
}

constexpr std::string_view kLabelHeader = "item_id\tclass_id\ts0\ts1\ts2\ts3\ts4";

}  // namespace

std::vector<RawLabelRecord> decode_label_records(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::SchemaError, "empty label file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kLabelHeader, ErrorCode::SchemaError, "label file header mismatch");
  std::vector<RawLabelRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const std::string where = "label line " + std::to_string(lineno);
    require(f.size() == 2 + kLabelerCount, ErrorCode::SchemaError, where + ": expected 7 columns");
    RawLabelRecord r{f[0], parse_score(f[1], where), {}};
    for (std::size_t l = 0; l < kLabelerCount; ++l) r.scores.push_back(parse_score(f[2 + l], where));
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

std::string encode_label_records(const std::vector<RawLabelRecord>& records) {
  std::ostringstream os;
  os << kLabelHeader << '\n';
  for (const auto& r : records) {
    os << r.item_id << '\t' << r.class_id;
    for (int s : r.scores) os << '\t' << s;
    os << '\n';
  }
  return os.str();
}

}  // namespace dmcl
