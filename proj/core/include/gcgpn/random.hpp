#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace gcgpn {

using Rng = std::mt19937_64;

// splitmix64 finaliser; derives independent stream seeds from (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Uniform sample of k distinct values from [0, n) in random order
// (partial Fisher-Yates).
std::vector<std::size_t> random_sample(std::size_t n, std::size_t k, Rng& rng);

}  // namespace gcgpn
