#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace kmp {

/// 64-bit FNV-1a. Used for library checksums and seed derivation, so the
/// value must stay stable across platforms.
std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Seed for sub-task `index` of a run seeded with `seed` (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace kmp
