#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pnp {

using Rng = std::mt19937_64;

// Mixes a list of integers into one 64-bit seed (splitmix64 chain). Used to
// give every (seed, epoch, index, ...) tuple its own independent stream.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(parts));
}

// Fisher–Yates with our own index draws so the order does not depend on the
// standard library's shuffle implementation.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

std::vector<std::size_t> iota_indices(std::size_t n);

}  // namespace pnp
