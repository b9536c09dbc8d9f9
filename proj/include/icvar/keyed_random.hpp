#pragma once

// Counter-based pseudorandomness: every draw is a pure function of its key,
// so results do not depend on the order (or thread) in which draws are made.

#include <cstdint>
#include <initializer_list>

namespace icvar {

struct Seed {
    std::uint64_t value = 0;

    friend bool operator==(Seed, Seed) = default;
};

namespace detail {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Hash of an ordered key tuple.
constexpr std::uint64_t keyed_hash(std::initializer_list<std::uint64_t> key) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t k : key) {
        h = detail::mix64(h ^ detail::mix64(k));
    }
    return h;
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double keyed_uniform(std::initializer_list<std::uint64_t> key) noexcept {
    return static_cast<double>(keyed_hash(key) >> 11) * 0x1.0p-53;
}

/// Trial seed for replicate `replicate` of grid cell `cell`.
constexpr Seed derive_seed(Seed master, std::uint64_t cell, std::uint64_t replicate) noexcept {
    return Seed{keyed_hash({master.value, 0x5eedULL, cell, replicate})};
}

} // namespace icvar
