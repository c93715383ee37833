#pragma once

#include <cstdint>
#include <random>

namespace fpp {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Engine for stream `stream` of a run seeded with `seed`. Streams keyed by
/// (seed, path index) make sampling independent of scheduling.
inline std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(mix64(seed)), static_cast<std::uint32_t>(mix64(seed) >> 32),
                      static_cast<std::uint32_t>(mix64(stream ^ 0xd1b54a32d192ed03ULL)),
                      static_cast<std::uint32_t>(mix64(stream ^ 0xd1b54a32d192ed03ULL) >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform double in (0, 1]; never returns 0 so it is safe under log().
template <typename Engine>
double uniform_open0(Engine &eng) {
    return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
}

} // namespace fpp
