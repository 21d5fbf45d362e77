#include "hqmq/scalar_quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hqmq/errors.hpp"

namespace hqmq {

namespace {

void check_bits(int radius_bits) {
    if (radius_bits < kMinRadiusBits || radius_bits > kMaxRadiusBits) {
        throw InvalidArgument("radius bits must be in [1, 8], got " + std::to_string(radius_bits));
    }
}

} // namespace

RadiusCode quantize_radius(double r, double sigma, int radius_bits) {
    check_bits(radius_bits);
    HQMQ_THROW_IF_NOT(sigma > 0.0, InvalidArgument, "radius scale must be positive");
    const double levels = static_cast<double>((1U << radius_bits) - 1);
    const double q = std::clamp(std::round(r * levels / sigma), 0.0, levels);
    return {static_cast<std::uint32_t>(q), static_cast<std::uint8_t>(radius_bits)};
}

double dequantize_radius(const RadiusCode& code, double sigma) {
    check_bits(code.bits);
    const double levels = static_cast<double>((1U << code.bits) - 1);
    return static_cast<double>(code.quantum) * sigma / levels;
}

TokenScale token_scale(std::span<const double> chunk_norms) {
    HQMQ_THROW_IF_NOT(!chunk_norms.empty(), InvalidArgument, "token_scale of an empty token");
    const double mx = *std::max_element(chunk_norms.begin(), chunk_norms.end());
    return {mx > 0.0 ? mx : 1.0};
}

} // namespace hqmq
