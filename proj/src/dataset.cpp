#include "dmcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "dmcl/error.hpp"

namespace dmcl {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  fail(ErrorCode::FormatError, "unknown split '" + std::string(s) + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  std::map<int, Split> class_split;
  for (const auto& e : entries) {
    require(!e.item_id.empty(), ErrorCode::FormatError, "empty item id");
    require(ids.insert(e.item_id).second, ErrorCode::FormatError,
            "duplicate item id '" + e.item_id + "'");
    auto [it, inserted] = class_split.emplace(e.class_id, e.split);
    require(inserted || it->second == e.split, ErrorCode::FormatError,
            "class " + std::to_string(e.class_id) + " appears in more than one split");
    require(!e.is_query || e.split != Split::Train, ErrorCode::FormatError,
            "train item '" + e.item_id + "' flagged as query");
  }
}

std::vector<int> DatasetManifest::classes(Split s) const {
  std::set<int> out;
  for (const auto& e : entries)
    if (e.split == s) out.insert(e.class_id);
  return {out.begin(), out.end()};
}

SplitFractions SplitFractions::reference_table() {
  return {107.0 / 167.0, 20.0 / 167.0, 40.0 / 167.0};
}

void SplitFractions::validate() const {
  require(train >= 0.0 && validation >= 0.0 && test >= 0.0, ErrorCode::SchemaError,
          "split fractions must be non-negative");
  require(std::abs(train + validation + test - 1.0) <= 1e-9, ErrorCode::SchemaError,
          "split fractions must sum to 1");
}

DatasetManifest split_disjoint(const std::vector<ItemRef>& items, const SplitFractions& fractions,
                               Rng& rng) {
  fractions.validate();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i) by_class[items[i].class_id].push_back(i);
  const std::size_t k = by_class.size();
  require(k >= 3, ErrorCode::TooFewClasses,
          "need at least 3 classes for a train/validation/test split, got " + std::to_string(k));

  const auto rounded = [k](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(k))));
  };
  const std::size_t n_val = rounded(fractions.validation);
  const std::size_t n_test = rounded(fractions.test);
  require(n_val + n_test < k, ErrorCode::TooFewClasses, "no classes left for training");

  std::vector<int> order;
  for (const auto& [c, _] : by_class) order.push_back(c);
  rng.shuffle(order);

  std::map<int, Split> assignment;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Split s = Split::Train;
    if (i < n_val)
      s = Split::Validation;
    else if (i < n_val + n_test)
      s = Split::Test;
    assignment[order[i]] = s;
  }

  std::vector<char> is_query(items.size(), 0);
  for (const auto& [c, members] : by_class) {
    if (assignment[c] == Split::Train) continue;
    require(members.size() >= kQueriesPerClass + 1, ErrorCode::ClassTooSmall,
            "class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                " items; a query class needs at least " + std::to_string(kQueriesPerClass + 1));
    std::vector<std::size_t> pool = members;
    for (std::size_t q = 0; q < kQueriesPerClass; ++q) {
      const std::size_t j = q + rng.index(pool.size() - q);
      std::swap(pool[q], pool[j]);
      is_query[pool[q]] = 1;
    }
  }

  DatasetManifest m;
  m.entries.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    m.entries.push_back({items[i].item_id, items[i].class_id, assignment[items[i].class_id],
                         is_query[i] != 0, items[i].feature_path});
  m.validate();
  return m;
}

void SyntheticSpec::validate() const {
  require(classes >= 1, ErrorCode::BadSpec, "classes must be positive");
  require(items_min >= 1 && items_min <= items_max, ErrorCode::BadSpec,
          "items range must satisfy 1 <= items_min <= items_max");
  require(channels >= 1, ErrorCode::BadSpec, "channels must be positive");
  require(grid_min >= 1 && grid_min <= grid_max, ErrorCode::BadSpec,
          "grid range must satisfy 1 <= grid_min <= grid_max");
  require(std::isfinite(center_spread) && center_spread >= 0.0, ErrorCode::BadSpec,
          "center_spread must be finite and non-negative");
  require(std::isfinite(noise) && noise >= 0.0, ErrorCode::BadSpec,
          "noise must be finite and non-negative");
  require(std::isfinite(nuisance) && nuisance >= 0.0, ErrorCode::BadSpec,
          "nuisance must be finite and non-negative");
  require(nuisance_rank <= channels, ErrorCode::BadSpec, "nuisance_rank exceeds channels");
  require(std::isfinite(class_variation) && class_variation >= 0.0, ErrorCode::BadSpec,
          "class_variation must be finite and non-negative");
  require(class_variation_rank <= channels, ErrorCode::BadSpec,
          "class_variation_rank exceeds channels");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t c = spec.channels;

  const auto random_basis = [&](std::size_t rank) {
    std::vector<Vec> basis(rank, Vec(c));
    for (auto& b : basis) {
      for (double& v : b) v = rng.normal();
      const double n = norm(b);
      for (double& v : b) v /= n;
    }
    return basis;
  };
  const std::vector<Vec> shared = random_basis(spec.nuisance_rank);

  SyntheticDataset out;
  Vec style(c);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    Vec center(c);
    for (double& v : center) v = spec.center_spread * rng.normal();
    const std::vector<Vec> own = random_basis(spec.class_variation_rank);
    const std::size_t count = spec.items_min + rng.index(spec.items_max - spec.items_min + 1);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t h = spec.grid_min + rng.index(spec.grid_max - spec.grid_min + 1);
      const std::size_t w = spec.grid_min + rng.index(spec.grid_max - spec.grid_min + 1);
      std::fill(style.begin(), style.end(), 0.0);
      for (const auto& b : shared) axpy(spec.nuisance * rng.normal(), b, style);
      for (const auto& b : own) axpy(spec.class_variation * rng.normal(), b, style);

      std::vector<double> values(h * w * c);
      for (std::size_t l = 0; l < h * w; ++l) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = center[ch] + style[ch] + spec.noise * rng.normal();
          values[l * c + ch] = v > 0.0 ? static_cast<double>(static_cast<float>(v)) : 0.0;
        }
      }
      char id[32];
      std::snprintf(id, sizeof id, "k%03zu_%04zu", k, i);
      out.items.push_back({id, static_cast<int>(k), std::string("features/") + id + ".fmv"});
      out.features.emplace_back(h, w, c, std::move(values));
    }
  }
  return out;
}

std::vector<std::size_t> Dataset::indices(Split s) const { return indices_in({s}); }

std::vector<std::size_t> Dataset::indices_in(std::initializer_list<Split> splits) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (std::find(splits.begin(), splits.end(), manifest.entries[i].split) != splits.end())
      out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::queries(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].split == s && manifest.entries[i].is_query) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::database(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].split == s && !manifest.entries[i].is_query) out.push_back(i);
  return out;
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec, const SplitFractions& fractions) {
  SyntheticDataset synth = generate_synthetic(spec);
  Rng split_rng = Rng(spec.seed).fork(1);
  Dataset d;
  d.manifest = split_disjoint(synth.items, fractions, split_rng);
  d.features = std::move(synth.features);
  return d;
}

}  // namespace dmcl
