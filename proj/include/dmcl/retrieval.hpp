#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmcl/kernels.hpp"
#include "dmcl/losses.hpp"
#include "dmcl/numerics.hpp"
#include "dmcl/rng.hpp"

namespace dmcl {

/// Database side of exhaustive retrieval. Embeddings are unit-norm rows.
struct RetrievalIndex {
  Mat embeddings;
  std::vector<int> labels;
  std::vector<std::string> ids;

  /// Throws DimMismatch / BadSpec when rows, labels and ids disagree or a row
  /// is not unit-norm within 1e-6.
  static RetrievalIndex build(Mat embeddings, std::vector<int> labels,
                              std::vector<std::string> ids = {});
  std::size_t size() const noexcept { return labels.size(); }
};

inline constexpr std::array<std::size_t, 4> kRankKs = {1, 2, 4, 8};

struct EvalReport {
  double mean_ap = 0.0;
  std::array<double, kRankKs.size()> rank_k{};  // aligned with kRankKs
  Vec per_query_ap;
  std::size_t query_count = 0;

  double rank(std::size_t k) const;
};

/// (1 / total_relevant) * sum of precision@i over relevant positions i.
/// Throws NoRelevant when total_relevant is zero.
double average_precision(std::span<const std::uint8_t> ranked_relevance,
                         std::size_t total_relevant);

/// Ranks the database by ascending Euclidean distance for every query (ties
/// keep database order) and scores mAP and rank-k.
EvalReport evaluate(const RetrievalIndex& index, const Mat& queries,
                    std::span<const int> query_labels, ExecMode mode = ExecMode::Serial);

/// Same ranking and scoring without the unit-norm requirement, for
/// transformed (e.g. PCA-projected) vectors.
EvalReport evaluate_vectors(const Mat& database, std::span<const int> database_labels,
                            const Mat& queries, std::span<const int> query_labels,
                            ExecMode mode = ExecMode::Serial);

enum class Polarity { Positive, Negative };

std::string_view to_string(Polarity p);

struct DistanceDistributionSummary {
  Polarity polarity = Polarity::Positive;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  Vec bin_edges;                    // kHistogramBins + 1 edges over [0, 2]
  std::vector<std::size_t> counts;  // kHistogramBins
};

inline constexpr std::size_t kHistogramBins = 50;
inline constexpr double kHistogramMax = 2.0;

DistanceDistributionSummary summarize_distances(Polarity polarity, std::span<const double> distances);

struct DistanceDistributions {
  DistanceDistributionSummary positive;
  DistanceDistributionSummary negative;
};

/// Draws `sample_pairs` pairs of each polarity uniformly from all same-class
/// (resp. cross-class) unordered pairs of rows.
DistanceDistributions distance_distributions(const Mat& embeddings, std::span<const int> labels,
                                             std::size_t sample_pairs, Rng& rng);

/// Starting margins: (positive mean, negative mean).
/// Throws InvertedDistributions unless positive mean < negative mean.
MarginConfig suggest_margins(const DistanceDistributionSummary& positive,
                             const DistanceDistributionSummary& negative);

}  // namespace dmcl
