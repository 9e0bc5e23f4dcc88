#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace layerscope {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substreams from one seed.
std::uint64_t mix64(std::uint64_t x);

// Seed for substream `stream` of `master`. Work split into substreams gives
// the same draws regardless of how the streams are scheduled.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// FNV-1a over the bytes of `text`, mixed with `seed`. Stable across
// platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed);

}  // namespace layerscope
