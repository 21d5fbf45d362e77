#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hqmq/quat.hpp"

namespace hqmq {

/// Batches smaller than this give a noisy median; extraction still runs.
inline constexpr std::size_t kStableBatchChunks = 1000;

/// Which chunks share one median estimate.
enum class MedianPooling : std::uint8_t {
    AcrossHeads = 0, ///< one median per (layer, role) call, pooled over heads and tokens
    PerHead = 1,     ///< one median per head
};

struct OutlierPolicy {
    double multiplier = 3.0;
};

using HalfQuad = std::array<std::uint16_t, 4>;

struct ExtractionResult {
    std::vector<std::uint8_t> flags; ///< 1 per chunk, 1 = outlier
    std::vector<HalfQuad> payloads;  ///< binary16 4-tuples of flagged chunks, in chunk order
    double r_med = 0.0;
    double fraction = 0.0;
    bool small_batch = false;

    std::size_t count() const { return payloads.size(); }
};

/// Lower median (element (n-1)/2 of the sorted values). `values` must be
/// nonempty.
double lower_median(std::span<const double> values);

/// Flag chunks whose norm exceeds multiplier * (lower median norm), strictly.
/// Throws InvalidArgument on an empty batch, a non-positive multiplier, or a
/// flagged value outside the binary16 range.
ExtractionResult extract(std::span<const Quaternion> chunks, const OutlierPolicy& policy);

/// Per-element bits with extraction at outlier fraction p:
/// (1 - p) * b + 16 p + 1 / d_chunk.
double effective_bits(double b_hqmq, double p, int d_chunk = 4);

HalfQuad to_half_quad(const Quaternion& q);
Quaternion from_half_quad(const HalfQuad& h);

} // namespace hqmq
