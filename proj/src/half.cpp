#include "hqmq/half.hpp"

#include <bit>
#include <cmath>

namespace hqmq {

std::uint16_t half_from_double(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000U);
    const int exp_field = static_cast<int>((bits >> 52) & 0x7FF);
    const std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);

    if (exp_field == 0x7FF) {
        return static_cast<std::uint16_t>(sign | (mant != 0 ? 0x7E00U : 0x7C00U));
    }
    if (exp_field == 0) {
        // Double subnormals are far below the smallest half subnormal.
        return sign;
    }
    const int e = exp_field - 1023;
    if (e > 15) {
        return static_cast<std::uint16_t>(sign | 0x7C00U);
    }

    const std::uint64_t full = mant | (std::uint64_t{1} << 52);
    std::uint64_t h = 0;
    int shift = 0;
    if (e >= -14) {
        shift = 42;
        // The implicit bit lands on bit 10 and supplies the +1 of the biased exponent.
        h = (static_cast<std::uint64_t>(e + 14) << 10) + (full >> shift);
    } else {
        shift = 42 + (-14 - e);
        if (shift > 63) {
            return sign;
        }
        h = full >> shift;
    }
    const std::uint64_t rem = full & ((std::uint64_t{1} << shift) - 1);
    const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
    if (rem > halfway || (rem == halfway && (h & 1U))) {
        ++h;
    }
    if (h >= 0x7C00U) {
        h = 0x7C00U;
    }
    return static_cast<std::uint16_t>(sign | h);
}

double half_to_double(std::uint16_t h) {
    const bool negative = (h & 0x8000U) != 0;
    const int exp_field = (h >> 10) & 0x1F;
    const int mant = h & 0x3FF;
    double mag = 0.0;
    if (exp_field == 0) {
        mag = std::ldexp(static_cast<double>(mant), -24);
    } else if (exp_field == 0x1F) {
        mag = mant != 0 ? std::nan("") : INFINITY;
    } else {
        mag = std::ldexp(static_cast<double>(mant | 0x400), exp_field - 25);
    }
    return negative ? -mag : mag;
}

} // namespace hqmq
