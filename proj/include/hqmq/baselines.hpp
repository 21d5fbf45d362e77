#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hqmq/codec.hpp"
#include "hqmq/quat.hpp"

namespace hqmq {

/// Symmetric signed per-row integer quantizer. Each (b, h, t) row gets
/// scale = max |x| (stored as binary16); q = round(x / scale * (2^(B-1) - 1))
/// clamped to [-2^(B-1), 2^(B-1) - 1]. An all-zero row decodes to zeros.
struct NaiveIntConfig {
    int bits = 4;
    /// Optional Med-C extraction applied first: flagged chunks are kept at
    /// binary16 and excluded from the row scale.
    std::optional<double> outlier_multiplier;
};

struct NaiveIntResult {
    std::vector<double> data;
    double outlier_fraction = 0.0;
};

NaiveIntResult naive_int_roundtrip(std::span<const double> data, const TensorShape& shape,
                                   const NaiveIntConfig& cfg);

/// Two random codebooks of K unit 4-vectors; a chunk direction is
/// approximated by normalize(first[i1] + second[i2]).
class AdditiveCodebookPair {
public:
    AdditiveCodebookPair(std::size_t K, std::uint64_t seed);

    std::size_t size() const { return k_; }
    const std::vector<Quaternion>& first() const { return first_; }
    const std::vector<Quaternion>& second() const { return second_; }

    /// Normalized sum for pair (i1, i2); nullopt when the sum is (near) zero.
    std::optional<Quaternion> direction(std::size_t i1, std::size_t i2) const;

    struct Match {
        std::size_t i1 = 0;
        std::size_t i2 = 0;
        double cosine = -2.0;
    };
    /// Exhaustive search over all K^2 pairs, skipping degenerate sums; ties go
    /// to the lowest i1 * K + i2.
    Match nearest(const Quaternion& u) const;

    /// ceil(2 log2 K) + b_r.
    static double bits_per_chunk(std::size_t K, int radius_bits);

private:
    std::size_t k_;
    std::vector<Quaternion> first_;
    std::vector<Quaternion> second_;
    std::vector<Quaternion> directions_; ///< i1 * K + i2
    std::vector<std::uint8_t> valid_;
};

/// Per-row radius scale (as in HQMQ) and additive direction search per chunk.
std::vector<double> additive_vq_roundtrip(std::span<const double> data, const TensorShape& shape,
                                          const AdditiveCodebookPair& books, int radius_bits);
std::vector<double> additive_vq_roundtrip(std::span<const double> data, const TensorShape& shape,
                                          std::size_t K, int radius_bits, std::uint64_t seed);

} // namespace hqmq
