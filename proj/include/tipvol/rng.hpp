#pragma once

#include <cstdint>
#include <random>

namespace tipvol {

// Independent random streams keyed by (seed, day, purpose). Each stream is an
// mt19937_64 seeded through a SplitMix64 mix of the key, so any day can be
// regenerated on its own without replaying the days before it.
enum class Stream : std::uint64_t {
    har_innovation = 1,
    brownian = 2,
    jump_arrival = 3,
    jump_size = 4,
    micro_noise = 5,
    spot_noise = 6,
    generic = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t day, Stream purpose,
                                   std::uint64_t attempt = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ day);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ attempt);
    return std::mt19937_64(h);
}

} // namespace tipvol
