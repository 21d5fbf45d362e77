#pragma once

#include <cstdint>

namespace hqmq {

/// IEEE 754 binary16 bits from a double, round-to-nearest-even. Values at or
/// beyond the rounding threshold 65520 become ±inf; NaN maps to a quiet NaN.
std::uint16_t half_from_double(double v);

double half_to_double(std::uint16_t h);

/// half_to_double(half_from_double(v)).
inline double round_to_half(double v) {
    return half_to_double(half_from_double(v));
}

/// Largest finite binary16 value.
inline constexpr double kHalfMax = 65504.0;

} // namespace hqmq
