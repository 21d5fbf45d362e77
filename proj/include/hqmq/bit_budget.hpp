#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hqmq {

enum class BitMode : std::uint8_t {
    Fractional, ///< log2(24S) index bits, as in the published tables
    Ceiled,     ///< ceil(log2(24S)) index bits, as actually stored
};

std::string_view mode_name(BitMode m);

struct BitBudget {
    std::uint32_t secondary_size = 0;
    int radius_bits = 0;
    std::uint32_t head_dim = 0;
    BitMode mode = BitMode::Fractional;

    double index_bits_fractional = 0.0;
    int index_bits_ceiled = 0;
    /// Index bits of `mode`.
    double index_bits = 0.0;
    double per_chunk_bits = 0.0;
    /// Amortized per original element, including the padding multiplier
    /// ceil(d_h/4)*4/d_h when d_h is not a multiple of 4.
    double per_element_bits = 0.0;
    /// per_element_bits + 16/d_h for the per-token binary16 scale.
    double per_element_with_scale = 0.0;
    /// 16 / per_element_with_scale.
    double compression_ratio = 0.0;
};

/// Smallest k with 2^k >= n (n >= 1).
int ceil_log2(std::uint64_t n);

BitBudget budget(std::uint32_t secondary_size, int radius_bits, std::uint32_t head_dim, BitMode mode);

/// "sNN_rM" -> (NN, M). Throws InvalidArgument on anything else.
struct ConfigName {
    std::uint32_t secondary_size;
    int radius_bits;
};
ConfigName parse_config_name(std::string_view s);
std::string config_name(std::uint32_t secondary_size, int radius_bits);

struct ModelShape {
    std::uint32_t layers = 0;
    std::uint32_t kv_heads = 0;
    std::uint32_t head_dim = 0;
};

/// Bytes for K and V: 2 * layers * kv_heads * d_h * tokens * bits / 8.
double cache_size_bytes(const ModelShape& model, std::uint64_t context_tokens, double bits_per_element);

} // namespace hqmq
