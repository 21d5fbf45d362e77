#include "hqmq/random.hpp"

#include <cmath>
#include <numbers>

namespace hqmq {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += kGoldenGamma;
    return mix64(state);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t k : keys) {
        h = mix64(h ^ mix64(k + kGoldenGamma));
    }
    return h;
}

Xoshiro256::Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) {
        word = splitmix64(sm);
    }
}

std::uint64_t Xoshiro256::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Xoshiro256::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = rad * std::sin(theta);
    has_cached_ = true;
    return rad * std::cos(theta);
}

} // namespace hqmq
