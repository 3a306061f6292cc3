#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tdsearch/tensor.hpp"

namespace tds {

/// All randomness flows through std::mt19937_64 with the helpers below.
/// The engine's output sequence is fixed by the standard; the standard
/// library distributions are not, so uniform and normal draws are
/// implemented here to keep results identical across toolchains.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent seed for work item `stream` of a computation seeded by `seed`.
/// Parallel loops seed one generator per item from this, so results do not
/// depend on scheduling or worker count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x51ed2701));
}

/// Uniform in [0, 1).
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [0, n). n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

/// Uniform integer in [lo, hi] inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

/// Standard normal via Box-Muller; draws two uniforms per value.
inline double normal(Rng& rng) {
    double u1 = uniform_real(rng);
    while (u1 <= 0.0) u1 = uniform_real(rng);
    const double u2 = uniform_real(rng);
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline DenseTensor random_normal(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
    DenseTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * normal(rng);
    return t;
}

}  // namespace tds
