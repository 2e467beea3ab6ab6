#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dmcl/losses.hpp"
#include "dmcl/rng.hpp"

namespace dmcl {

struct LabeledItem {
  std::string item_id;
  int class_id = 0;
  std::size_t source = 0;  // index into the owning feature store
};

/// Pair of item positions (indices into the sampled item list).
struct ItemPair {
  std::size_t first = 0;
  std::size_t second = 0;
  PairLabel label = PairLabel::Similar;
  /// Class this pair is counted toward (the first member's class).
  int counted_class = 0;

  friend bool operator==(const ItemPair&, const ItemPair&) = default;
};

struct PairBatch {
  std::vector<ItemPair> pairs;
  int epoch = 0;
  std::uint64_t seed = 0;
};

/// For every class, `per_class` positive pairs (distinct members, uniform over
/// unordered pairs, with replacement) and `per_class` negative pairs (first
/// member from the class, second uniform over all other-class items). The
/// result is shuffled.
PairBatch generate_pairs(const std::vector<LabeledItem>& items, std::size_t per_class, Rng& rng,
                         int epoch = 0);

bool regeneration_due(int epoch, int period);

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// `per_class` triplets anchored in each class, shuffled.
std::vector<Triplet> generate_triplets(const std::vector<LabeledItem>& items,
                                       std::size_t per_class, Rng& rng);

}  // namespace dmcl
