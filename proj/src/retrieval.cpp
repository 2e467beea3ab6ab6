#include "dmcl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dmcl/detail/parallel.hpp"
#include "dmcl/error.hpp"

namespace dmcl {

RetrievalIndex RetrievalIndex::build(Mat embeddings, std::vector<int> labels,
                                     std::vector<std::string> ids) {
  require(embeddings.rows() >= 1, ErrorCode::InsufficientSamples, "empty retrieval index");
  require(labels.size() == embeddings.rows(), ErrorCode::DimMismatch,
          "label count does not match embedding rows");
  require(ids.empty() || ids.size() == labels.size(), ErrorCode::DimMismatch,
          "id count does not match embedding rows");
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    const double n = norm(embeddings.row(r));
    require(std::abs(n - 1.0) <= 1e-6, ErrorCode::BadSpec,
            "index row " + std::to_string(r) + " is not unit-norm (" + std::to_string(n) + ")");
  }
  return {std::move(embeddings), std::move(labels), std::move(ids)};
}

double EvalReport::rank(std::size_t k) const {
  for (std::size_t i = 0; i < kRankKs.size(); ++i)
    if (kRankKs[i] == k) return rank_k[i];
  fail(ErrorCode::BadSpec, "rank-" + std::to_string(k) + " is not reported");
}

double average_precision(std::span<const std::uint8_t> ranked_relevance,
                         std::size_t total_relevant) {
  require(total_relevant >= 1, ErrorCode::NoRelevant, "query has no relevant items");
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranked_relevance.size(); ++i) {
    if (!ranked_relevance[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  require(hits <= total_relevant, ErrorCode::BadSpec,
          "more relevant items in the ranking than total_relevant");
  return sum / static_cast<double>(total_relevant);
}

namespace {

struct QueryResult {
  double ap = 0.0;
  std::array<bool, kRankKs.size()> hit{};
};

QueryResult score_query(std::span<const double> distances, std::span<const int> db_labels,
                        int label) {
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  std::vector<std::uint8_t> relevance(order.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    relevance[i] = db_labels[order[i]] == label ? 1 : 0;
    total += relevance[i];
  }
  require(total >= 1, ErrorCode::NoRelevant,
          "query of class " + std::to_string(label) + " has no same-class database item");
  QueryResult r;
  r.ap = average_precision(relevance, total);
  std::size_t first_hit = order.size();
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (relevance[i]) {
      first_hit = i;
      break;
    }
  }
  for (std::size_t k = 0; k < kRankKs.size(); ++k) r.hit[k] = first_hit < kRankKs[k];
  return r;
}

}  // namespace

EvalReport evaluate_vectors(const Mat& database, std::span<const int> database_labels,
                            const Mat& queries, std::span<const int> query_labels,
                            ExecMode mode) {
  require(database_labels.size() == database.rows(), ErrorCode::DimMismatch,
          "database label count mismatch");
  require(query_labels.size() == queries.rows(), ErrorCode::DimMismatch,
          "query label count mismatch");
  require(queries.rows() >= 1, ErrorCode::InsufficientSamples, "no queries");
  const Mat dist = distance_matrix(queries, database, mode);

  std::vector<QueryResult> results(queries.rows());
  const auto one = [&](std::size_t q) {
    results[q] = score_query(dist.row(q), database_labels, query_labels[q]);
  };
  if (mode == ExecMode::Parallel) {
    detail::parallel_for(queries.rows(), one);
  } else {
    for (std::size_t q = 0; q < queries.rows(); ++q) one(q);
  }

  EvalReport report;
  report.query_count = queries.rows();
  report.per_query_ap.reserve(results.size());
  std::array<std::size_t, kRankKs.size()> hits{};
  for (const auto& r : results) {
    report.per_query_ap.push_back(r.ap);
    for (std::size_t k = 0; k < kRankKs.size(); ++k) hits[k] += r.hit[k] ? 1 : 0;
  }
  report.mean_ap = std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(), 0.0) /
                   static_cast<double>(report.query_count);
  for (std::size_t k = 0; k < kRankKs.size(); ++k)
    report.rank_k[k] = static_cast<double>(hits[k]) / static_cast<double>(report.query_count);
  return report;
}

EvalReport evaluate(const RetrievalIndex& index, const Mat& queries,
                    std::span<const int> query_labels, ExecMode mode) {
  return evaluate_vectors(index.embeddings, index.labels, queries, query_labels, mode);
}

std::string_view to_string(Polarity p) {
  return p == Polarity::Positive ? "positive" : "negative";
}

DistanceDistributionSummary summarize_distances(Polarity polarity,
                                                std::span<const double> distances) {
  DistanceDistributionSummary s;
  s.polarity = polarity;
  s.count = distances.size();
  s.bin_edges.resize(kHistogramBins + 1);
  for (std::size_t b = 0; b <= kHistogramBins; ++b)
    s.bin_edges[b] = kHistogramMax * static_cast<double>(b) / static_cast<double>(kHistogramBins);
  s.counts.assign(kHistogramBins, 0);
  if (distances.empty()) return s;

  double sum = 0.0;
  for (double d : distances) {
    require(d >= 0.0, ErrorCode::NegativeDistance, "negative distance in summary");
    sum += d;
    auto bin = static_cast<std::size_t>(d / kHistogramMax * static_cast<double>(kHistogramBins));
    s.counts[std::min(bin, kHistogramBins - 1)] += 1;
  }
  s.mean = sum / static_cast<double>(distances.size());
  double ss = 0.0;
  for (double d : distances) ss += (d - s.mean) * (d - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(distances.size()));
  return s;
}

DistanceDistributions distance_distributions(const Mat& embeddings, std::span<const int> labels,
                                             std::size_t sample_pairs, Rng& rng) {
  require(labels.size() == embeddings.rows(), ErrorCode::DimMismatch, "label count mismatch");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  require(by_class.size() >= 2, ErrorCode::SingleClassDataset,
          "distance distributions need at least 2 classes");

  std::vector<const std::vector<std::size_t>*> groups;
  std::vector<double> cumulative;  // cumulative same-class pair counts
  double total_pairs = 0.0;
  for (const auto& [c, m] : by_class) {
    require(m.size() >= 2, ErrorCode::SingletonClass,
            "class " + std::to_string(c) + " has fewer than 2 items");
    const double n = static_cast<double>(m.size());
    total_pairs += n * (n - 1.0) / 2.0;
    groups.push_back(&m);
    cumulative.push_back(total_pairs);
  }

  std::vector<double> pos;
  std::vector<double> neg;
  pos.reserve(sample_pairs);
  neg.reserve(sample_pairs);
  // Positive: class chosen proportional to its pair count, then a uniform pair.
  for (std::size_t s = 0; s < sample_pairs; ++s) {
    const double u = rng.uniform() * total_pairs;
    const std::size_t g = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const auto& m = *groups[std::min(g, groups.size() - 1)];
    const std::size_t a = rng.index(m.size());
    std::size_t b = rng.index(m.size() - 1);
    if (b >= a) ++b;
    pos.push_back(euclidean_distance(embeddings.row(m[a]), embeddings.row(m[b])));
  }
  // Negative: rejection over uniform ordered pairs of distinct rows.
  const std::size_t n = labels.size();
  while (neg.size() < sample_pairs) {
    const std::size_t a = rng.index(n);
    const std::size_t b = rng.index(n);
    if (labels[a] == labels[b]) continue;
    neg.push_back(euclidean_distance(embeddings.row(a), embeddings.row(b)));
  }
  return {summarize_distances(Polarity::Positive, pos), summarize_distances(Polarity::Negative, neg)};
}

MarginConfig suggest_margins(const DistanceDistributionSummary& positive,
                             const DistanceDistributionSummary& negative) {
  require(positive.mean < negative.mean, ErrorCode::InvertedDistributions,
          "positive mean " + std::to_string(positive.mean) + " is not below negative mean " +
              std::to_string(negative.mean));
  return {positive.mean, negative.mean};
}

}  // namespace dmcl
