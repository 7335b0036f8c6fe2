#include "gcgpn/random.hpp"

#include <numeric>
#include <utility>

#include "gcgpn/errors.hpp"

namespace gcgpn {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> random_sample(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) {
    throw SamplingError("cannot sample " + std::to_string(k) + " of " + std::to_string(n) +
                        " elements without replacement");
  }
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace gcgpn
