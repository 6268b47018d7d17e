#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/pending/disjoint_sets.hpp>

namespace dynpar::detail {

// Merges the component labels of each pair in order and returns the index
// of the first pair whose labels are already merged.
inline std::optional<std::size_t> first_cycle(std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs) {
  std::vector<std::uint32_t> ids;
  ids.reserve(2 * pairs.size());
  for (const auto& [a, b] : pairs) {
    ids.push_back(a);
    ids.push_back(b);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index = [&](std::uint32_t x) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), x) - ids.begin());
  };
  boost::disjoint_sets_with_storage<> sets(ids.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto a = sets.find_set(index(pairs[k].first));
    const auto b = sets.find_set(index(pairs[k].second));
    if (a == b) return k;
    sets.link(a, b);
  }
  return std::nullopt;
}

}  // namespace dynpar::detail
