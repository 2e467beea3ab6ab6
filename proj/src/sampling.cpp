#include "dmcl/sampling.hpp"

#include <map>

#include "dmcl/error.hpp"

namespace dmcl {

namespace {

struct ClassIndex {
  std::vector<int> classes;
  std::vector<std::vector<std::size_t>> members;  // per class, positions in items
  std::vector<std::size_t> grouped;               // all positions, grouped by class
  std::vector<std::size_t> group_start;           // per class, offset into grouped
};

ClassIndex index_classes(const std::vector<LabeledItem>& items) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i) by_class[items[i].class_id].push_back(i);
  require(by_class.size() >= 2, ErrorCode::SingleClassDataset,
          "pair sampling needs at least 2 classes");
  ClassIndex idx;
  for (auto& [c, m] : by_class) {
    require(m.size() >= 2, ErrorCode::SingletonClass,
            "class " + std::to_string(c) + " has fewer than 2 items");
    idx.classes.push_back(c);
    idx.group_start.push_back(idx.grouped.size());
    idx.grouped.insert(idx.grouped.end(), m.begin(), m.end());
    idx.members.push_back(std::move(m));
  }
  return idx;
}

std::pair<std::size_t, std::size_t> distinct_pair(const std::vector<std::size_t>& members,
                                                  Rng& rng) {
  const std::size_t a = rng.index(members.size());
  std::size_t b = rng.index(members.size() - 1);
  if (b >= a) ++b;
  return {members[a], members[b]};
}

/// Uniform over the items outside class k.
std::size_t other_class_item(const ClassIndex& idx, std::size_t k, Rng& rng) {
  const std::size_t size = idx.members[k].size();
  std::size_t r = rng.index(idx.grouped.size() - size);
  if (r >= idx.group_start[k]) r += size;
  return idx.grouped[r];
}

}  // namespace

PairBatch generate_pairs(const std::vector<LabeledItem>& items, std::size_t per_class, Rng& rng,
                         int epoch) {
  const ClassIndex idx = index_classes(items);
  PairBatch batch;
  batch.epoch = epoch;
  batch.seed = rng.seed();
  batch.pairs.reserve(2 * per_class * idx.classes.size());
  for (std::size_t k = 0; k < idx.classes.size(); ++k) {
    const auto& members = idx.members[k];
    const int c = idx.classes[k];
    for (std::size_t n = 0; n < per_class; ++n) {
      const auto [a, b] = distinct_pair(members, rng);
      batch.pairs.push_back({a, b, PairLabel::Similar, c});
    }
    for (std::size_t n = 0; n < per_class; ++n) {
      const std::size_t a = members[rng.index(members.size())];
      const std::size_t b = other_class_item(idx, k, rng);
      batch.pairs.push_back({a, b, PairLabel::Dissimilar, c});
    }
  }
  rng.shuffle(batch.pairs);
  return batch;
}

bool regeneration_due(int epoch, int period) {
  require(period >= 1, ErrorCode::BadSpec, "regeneration period must be >= 1");
  return epoch % period == 0;
}

std::vector<Triplet> generate_triplets(const std::vector<LabeledItem>& items,
                                       std::size_t per_class, Rng& rng) {
  const ClassIndex idx = index_classes(items);
  std::vector<Triplet> out;
  out.reserve(per_class * idx.classes.size());
  for (std::size_t k = 0; k < idx.classes.size(); ++k) {
    const auto& members = idx.members[k];
    for (std::size_t n = 0; n < per_class; ++n) {
      const auto [a, p] = distinct_pair(members, rng);
      const std::size_t neg = other_class_item(idx, k, rng);
      out.push_back({a, p, neg});
    }
  }
  rng.shuffle(out);
  return out;
}

}  // namespace dmcl
