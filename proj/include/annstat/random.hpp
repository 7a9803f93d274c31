#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace annstat {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed for the `index`-th stream of a named component:
//   seed = mix64(mix64(master ^ fnv1a64(component)) + index)
// Every random draw in the toolkit goes through this rule so that a single
// master seed reproduces a whole run regardless of execution order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(master ^ fnv1a64(component)) + index);
}

inline constexpr std::string_view kSeedRule =
    "seed = mix64(mix64(master ^ fnv1a64(component)) + index)";

}  // namespace annstat
