#pragma once

#include <cstdint>
#include <span>

namespace hqmq {

struct RadiusCode {
    std::uint32_t quantum = 0;
    std::uint8_t bits = 0;

    friend bool operator==(const RadiusCode&, const RadiusCode&) = default;
};

/// Per-token scale for the uniform radius quantizer.
struct TokenScale {
    double sigma = 1.0;
};

inline constexpr int kMinRadiusBits = 1;
inline constexpr int kMaxRadiusBits = 8;

/// round(r * (2^b - 1) / sigma), half away from zero, clamped to the grid.
RadiusCode quantize_radius(double r, double sigma, int radius_bits);

/// quantum * sigma / (2^b - 1).
double dequantize_radius(const RadiusCode& code, double sigma);

/// sigma = max chunk norm; an all-zero token gets the sentinel sigma = 1.
TokenScale token_scale(std::span<const double> chunk_norms);

} // namespace hqmq
