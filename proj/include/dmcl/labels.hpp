#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace dmcl {

inline constexpr std::size_t kLabelerCount = 5;
inline constexpr int kMaxScore = 9;

/// One item's similarity scores from each labeler, each in [0, 9].
struct RawLabelRecord {
  std::string item_id;
  int class_id = 0;
  std::vector<int> scores;

  /// Throws SchemaError on out-of-range scores or a wrong labeler count.
  void validate(std::size_t labelers = kLabelerCount) const;
};

/// Non-negative per-labeler weights with a positive sum.
struct LabelerWeights {
  std::vector<double> values;

  void validate() const;
  /// 0.445, 0, 0.445, 0.055, 0.055
  static LabelerWeights reference();
};

inline constexpr double kDefaultScoreThreshold = 6.0;

/// sum_i w_i s_i
double aggregate_score(const RawLabelRecord& r, const LabelerWeights& w);

/// Ids of records whose aggregate score is >= threshold, in input order.
std::vector<std::string> filter_valid(const std::vector<RawLabelRecord>& records,
                                      const LabelerWeights& w,
                                      double threshold = kDefaultScoreThreshold);

/// Pearson correlation; 0 when either side has zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Per labeler, the number of classes in which that labeler has the lowest
/// average Pearson correlation with the other labelers. Tied labelers are all
/// counted. Classes need at least 2 items; at least 3 labelers are required.
std::vector<std::size_t> labeler_quality(const std::vector<RawLabelRecord>& records);

/// TSV with header item_id, class_id, s0..s4.
std::vector<RawLabelRecord> decode_label_records(const std::string& text);
std::string encode_label_records(const std::vector<RawLabelRecord>& records);

}  // namespace dmcl
