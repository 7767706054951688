#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mbiv {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

// Uniform in (0,1), never exactly 0.
[[nodiscard]] inline double counter_uniform(std::uint64_t key) noexcept {
    return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal drawn from a pure function of (seed, stream, row); Box-Muller on two derived uniforms.
[[nodiscard]] inline double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t row) noexcept {
    const std::uint64_t base = mix_key(mix_key(seed, stream), row);
    const double u1 = counter_uniform(base);
    const double u2 = counter_uniform(base ^ 0xd1b54a32d192ed03ULL);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Engine for iteration `iter` of a replicated loop; independent of thread scheduling.
[[nodiscard]] inline std::mt19937_64 substream(std::uint64_t root, std::uint64_t iter) {
    return std::mt19937_64(mix_key(root, iter));
}

}  // namespace mbiv
