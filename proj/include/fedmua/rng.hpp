#pragma once

#include <cstdint>
#include <random>

namespace fedmua {

// splitmix64 step; used to mix seeds into independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream derivation: every consumer of randomness derives its
// own engine from (base seed, stream tags). Streams for distinct tags are
// independent regardless of call order, which is what keeps parallel client
// training reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = mix64(base ^ 0x6a09e667f3bcc908ULL);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b + 0x243f6a8885a308d3ULL));
    s = mix64(s ^ mix64(c + 0x13198a2e03707344ULL));
    return s;
}

// Stream tags. Keeping them in one place avoids accidental collisions.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t partition = 2;
inline constexpr std::uint64_t local_train = 3;
inline constexpr std::uint64_t participants = 4;
inline constexpr std::uint64_t targets = 5;
inline constexpr std::uint64_t attack_random = 6;
inline constexpr std::uint64_t synthetic = 7;
}  // namespace stream

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace fedmua
