#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fpe {

/// splitmix64 finalizer; used to derive independent named seed streams from
/// one experiment seed so adding a consumer never shifts another's stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index = 0) {
    std::uint64_t h = base;
    for (char c : tag) h = mix_seed(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return mix_seed(h ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace fpe
