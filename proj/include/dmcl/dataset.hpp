#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dmcl/aggregation.hpp"
#include "dmcl/rng.hpp"

namespace dmcl {

enum class Split { Train, Validation, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ItemRef {
  std::string item_id;
  int class_id = 0;
  std::string feature_path;
};

struct ManifestEntry {
  std::string item_id;
  int class_id = 0;
  Split split = Split::Train;
  bool is_query = false;
  std::string feature_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Items with split assignment. Splits never share a class, and only
/// validation/test items can be queries.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  /// Throws FormatError on duplicate ids, shared classes or misplaced queries.
  void validate() const;
  std::vector<int> classes(Split s) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct SplitFractions {
  double train = 0.65;
  double validation = 0.10;
  double test = 0.25;

  /// Class-count fractions 107/167, 20/167, 40/167 of the reference split table.
  static SplitFractions reference_table();
  void validate() const;
};

/// Class-level partition: validation and test get round(K * fraction) classes
/// (at least one each), train gets the remainder. Two seeded queries are drawn
/// from every validation and test class.
DatasetManifest split_disjoint(const std::vector<ItemRef>& items, const SplitFractions& fractions,
                               Rng& rng);

/// Number of queries drawn per validation/test class.
inline constexpr std::size_t kQueriesPerClass = 2;

/// Parameters of the synthetic feature-map generator. Every location of an
/// item is center(class) + style(item) + noise, clipped at zero. The style
/// vector has a component in a low-rank subspace shared by all classes
/// (`nuisance`) and a component in a low-rank subspace private to the item's
/// class (`class_variation`).
struct SyntheticSpec {
  std::size_t classes = 20;
  std::size_t items_min = 30;
  std::size_t items_max = 30;
  std::size_t channels = 16;
  std::size_t grid_min = 2;
  std::size_t grid_max = 4;
  double center_spread = 1.0;
  double noise = 1.0;
  double nuisance = 2.0;
  std::size_t nuisance_rank = 4;
  double class_variation = 1.5;
  std::size_t class_variation_rank = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<ItemRef> items;
  std::vector<FeatureMap> features;  // parallel to items
};

/// Feature values are rounded to float precision so they survive the 32-bit
/// on-disk format unchanged.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Manifest plus in-memory feature maps, indexed in parallel.
struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureMap> features;

  std::vector<std::size_t> indices(Split s) const;
  std::vector<std::size_t> queries(Split s) const;
  std::vector<std::size_t> database(Split s) const;
  /// Items of the given splits.
  std::vector<std::size_t> indices_in(std::initializer_list<Split> splits) const;
};

/// generate_synthetic followed by split_disjoint, seeded from spec.seed.
Dataset make_synthetic_dataset(const SyntheticSpec& spec, const SplitFractions& fractions);

}  // namespace dmcl
