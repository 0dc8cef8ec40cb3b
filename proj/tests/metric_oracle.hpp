#pragma once

#include <map>
#include <string>

#include "dsia/action.hpp"

namespace testing {

// Counting-map reference for the multiset metrics, keyed on rendered text.
inline std::map<std::string, int> atom_counts(const dsia::ActionSequence& seq) {
  std::map<std::string, int> counts;
  for (const auto& a : seq) ++counts[dsia::render_action(dsia::normalize_action(a))];
  return counts;
}

inline int oracle_em(const dsia::ActionSequence& pred, const dsia::ActionSequence& gold) {
  return atom_counts(pred) == atom_counts(gold) ? 1 : 0;
}

inline double oracle_f1(const dsia::ActionSequence& pred, const dsia::ActionSequence& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  const auto p = atom_counts(pred);
  const auto g = atom_counts(gold);
  int common = 0;
  for (const auto& [atom, n] : p) {
    auto it = g.find(atom);
    if (it != g.end()) common += std::min(n, it->second);
  }
  if (common == 0) return 0.0;
  const double precision = double(common) / double(pred.size());
  const double recall = double(common) / double(gold.size());
  return 2 * precision * recall / (precision + recall);
}

// Random pair drawn from a pool small enough that overlaps are common.
template <typename Rng>
std::pair<dsia::ActionSequence, dsia::ActionSequence> random_pair(Rng& rng) {
  static const dsia::ActionSequence pool = {
      dsia::Call{"kitchen", "lamp", "turn_on", {}},
      dsia::Call{"kitchen", "lamp", "turn_off", {}},
      dsia::Call{"bedroom", "lamp", "turn_on", {}},
      dsia::Call{"bedroom", "fan", "set_level", {std::int64_t{3}}},
      dsia::Call{"bedroom", "fan", "set_level", {std::int64_t{4}}},
      dsia::Call{"hall", "lock", "lock", {}},
      dsia::ErrorToken{},
  };
  auto draw = [&] {
    dsia::ActionSequence seq;
    const std::size_t n = rng() % 5;
    for (std::size_t i = 0; i < n; ++i) seq.push_back(pool[rng() % pool.size()]);
    return seq;
  };
  auto pred = draw();
  auto gold = rng() % 4 == 0 ? pred : draw();
  if (rng() % 3 == 0) std::reverse(gold.begin(), gold.end());
  return {pred, gold};
}

}  // namespace testing
