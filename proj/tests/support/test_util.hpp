#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dmcl/dataset.hpp"
#include "dmcl/error.hpp"
#include "dmcl/labels.hpp"
#include "dmcl/rng.hpp"

namespace testutil {

/// Code of the dmcl::Error thrown by f, or nullopt if nothing is thrown.
inline std::optional<dmcl::ErrorCode> error_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const dmcl::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Small, quick synthetic dataset for trainer and CLI tests.
inline dmcl::SyntheticSpec small_spec(std::uint64_t seed = 1) {
  dmcl::SyntheticSpec s;
  s.classes = 6;
  s.items_min = 8;
  s.items_max = 10;
  s.channels = 6;
  s.grid_min = 2;
  s.grid_max = 3;
  s.noise = 0.4;
  s.nuisance = 0.5;
  s.nuisance_rank = 2;
  s.class_variation = 0.3;
  s.class_variation_rank = 1;
  s.seed = seed;
  return s;
}

inline dmcl::SplitFractions small_fractions() { return {0.5, 0.25, 0.25}; }

/// Records with hand-computed aggregate scores under the reference weights:
/// a 9.0, b 6.0, c 6.0, d 5.34, e 0.99, f 5.885, g 6.285.
inline std::vector<dmcl::RawLabelRecord> hand_label_fixture() {
  return {{"a", 1, {9, 0, 9, 9, 9}}, {"b", 1, {6, 9, 6, 6, 6}}, {"c", 1, {7, 0, 5, 6, 6}},
          {"d", 2, {6, 6, 6, 0, 0}}, {"e", 2, {0, 9, 0, 9, 9}}, {"f", 2, {5, 9, 6, 9, 9}},
          {"g", 2, {8, 2, 6, 1, 0}}};
}

inline const std::vector<std::string> kHandRetained = {"a", "b", "c", "g"};

/// Labelers that score a latent item quality with small noise, except one
/// labeler (`random_labeler`) who scores uniformly at random.
inline std::vector<dmcl::RawLabelRecord> noisy_label_fixture(std::uint64_t seed,
                                                             std::size_t random_labeler,
                                                             std::size_t classes = 10,
                                                             std::size_t items = 12) {
  dmcl::Rng rng(seed);
  std::vector<dmcl::RawLabelRecord> out;
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t i = 0; i < items; ++i) {
      const double quality = rng.uniform(0.0, 9.0);
      dmcl::RawLabelRecord r{"k" + std::to_string(k) + "_" + std::to_string(i), static_cast<int>(k), {}};
      for (std::size_t l = 0; l < dmcl::kLabelerCount; ++l) {
        double s = l == random_labeler ? static_cast<double>(rng.index(10)) : quality + rng.normal();
        s = std::clamp(std::round(s), 0.0, 9.0);
        r.scores.push_back(static_cast<int>(s));
      }
      out.push_back(r);
    }
  return out;
}

}  // namespace testutil
