#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

// Probability that a random positive outscores a random negative, ties half.
inline double mann_whitney_auc(const std::vector<std::pair<double, bool>>& scored) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (const auto& [s, p] : scored) (p ? pos : neg) += 1;
  for (const auto& [sp, pp] : scored) {
    if (!pp) continue;
    for (const auto& [sn, pn] : scored) {
      if (pn) continue;
      if (sp > sn) wins += 1.0;
      else if (sp == sn) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace oracle
