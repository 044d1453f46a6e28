#include "tdr/rng.hpp"

#include <algorithm>
#include <numeric>

namespace tdr {

std::vector<int> sample_without_replacement(int n, int k, SplitMix64& rng) {
  if (n < 0 || k < 0 || k > n)
    throw argument_error("sample_without_replacement: need 0 <= k <= n, got k=" +
                         std::to_string(k) + " n=" + std::to_string(n));
  // Partial Fisher-Yates over the index range.
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace tdr
