#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace hqmq {

/// SplitMix64 step: advances `state` by the golden-gamma increment and
/// returns the finalized output. Used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stateless 64-bit finalizer (the SplitMix64 output function).
std::uint64_t mix64(std::uint64_t x);

/// Derive a sub-seed from a root seed and a list of stream keys.
///
/// h = mix64(seed); for each key k: h = mix64(h ^ mix64(k + 0x9E3779B97F4A7C15)).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// xoshiro256** 1.0 (Blackman & Vigna). State is seeded from a single
/// 64-bit value by four SplitMix64 draws, so a seed reproduces the same
/// stream on every platform.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t operator()() { return next(); }

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    /// Uniform double in [0, 1): top 53 bits of one draw times 2^-53.
    double uniform();

    /// Standard normal via Box-Muller on two uniform draws.
    ///
    /// Draws come in pairs: u1 = 1 - uniform() (in (0, 1]), u2 = uniform();
    /// rad = sqrt(-2 ln u1); the pair is (rad cos 2πu2, rad sin 2πu2). The
    /// sine half is cached and returned by the next call.
    double gaussian();

    const std::array<std::uint64_t, 4>& state() const { return s_; }

private:
    std::array<std::uint64_t, 4> s_{};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace hqmq
