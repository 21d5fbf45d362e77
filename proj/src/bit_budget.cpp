#include "hqmq/bit_budget.hpp"

#include <charconv>
#include <cmath>

#include "hqmq/errors.hpp"

namespace hqmq {

std::string_view mode_name(BitMode m) {
    return m == BitMode::Fractional ? "fractional" : "ceiled";
}

int ceil_log2(std::uint64_t n) {
    HQMQ_THROW_IF_NOT(n >= 1, InvalidArgument, "ceil_log2 of zero");
    int k = 0;
    while ((std::uint64_t{1} << k) < n) {
        ++k;
    }
    return k;
}

BitBudget budget(std::uint32_t secondary_size, int radius_bits, std::uint32_t head_dim, BitMode mode) {
    HQMQ_THROW_IF_NOT(secondary_size >= 1, InvalidArgument, "S must be >= 1");
    HQMQ_THROW_IF_NOT(head_dim >= 4, InvalidArgument, "head_dim must be >= 4");
    HQMQ_THROW_IF_NOT(radius_bits >= 1, InvalidArgument, "radius bits must be >= 1");

    BitBudget b;
    b.secondary_size = secondary_size;
    b.radius_bits = radius_bits;
    b.head_dim = head_dim;
    b.mode = mode;
    const std::uint64_t joint = 24ULL * secondary_size;
    b.index_bits_fractional = std::log2(static_cast<double>(joint));
    b.index_bits_ceiled = ceil_log2(joint);
    b.index_bits = mode == BitMode::Fractional ? b.index_bits_fractional : b.index_bits_ceiled;
    b.per_chunk_bits = b.index_bits + radius_bits;

    const double padded = 4.0 * static_cast<double>((head_dim + 3) / 4);
    b.per_element_bits = b.per_chunk_bits / 4.0 * (padded / head_dim);
    b.per_element_with_scale = b.per_element_bits + 16.0 / head_dim;
    b.compression_ratio = 16.0 / b.per_element_with_scale;
    return b;
}

ConfigName parse_config_name(std::string_view s) {
    auto fail = [&] {
        return InvalidArgument("config must look like sNN_rM, got '" + std::string(s) + "'");
    };
    if (s.size() < 5 || s.front() != 's') {
        throw fail();
    }
    const auto sep = s.find("_r");
    if (sep == std::string_view::npos) {
        throw fail();
    }
    ConfigName out{};
    const auto s_part = s.substr(1, sep - 1);
    const auto r_part = s.substr(sep + 2);
    auto r1 = std::from_chars(s_part.data(), s_part.data() + s_part.size(), out.secondary_size);
    auto r2 = std::from_chars(r_part.data(), r_part.data() + r_part.size(), out.radius_bits);
    if (r1.ec != std::errc{} || r1.ptr != s_part.data() + s_part.size() || r2.ec != std::errc{} ||
        r2.ptr != r_part.data() + r_part.size() || out.secondary_size == 0 || out.radius_bits < 1 ||
        out.radius_bits > 8) {
        throw fail();
    }
    return out;
}

std::string config_name(std::uint32_t secondary_size, int radius_bits) {
    return "s" + std::to_string(secondary_size) + "_r" + std::to_string(radius_bits);
}

double cache_size_bytes(const ModelShape& model, std::uint64_t context_tokens, double bits_per_element) {
    HQMQ_THROW_IF_NOT(model.layers > 0 && model.kv_heads > 0 && model.head_dim > 0, InvalidArgument,
                      "model dimensions must be positive");
    const double elements = 2.0 * model.layers * model.kv_heads * model.head_dim *
                            static_cast<double>(context_tokens);
    return elements * bits_per_element / 8.0;
}

} // namespace hqmq
