#pragma once

#include <cstdint>
#include <vector>

namespace fspde {

/// SplitMix64 finalizer. Bijective on 64-bit words; nearby inputs map to
/// unrelated outputs.
std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for stream `index` under a master seed: the index advances the
/// SplitMix64 counter by the 64-bit golden-ratio increment before finalizing,
/// so consecutive indices yield decorrelated, reproducible streams.
std::uint64_t derive_subseed(std::uint64_t seed, std::uint64_t index);

/// n i.i.d. standard normals drawn from mt19937_64 seeded with `seed`.
std::vector<double> standard_normals(std::uint64_t seed, std::size_t n);

} // namespace fspde
