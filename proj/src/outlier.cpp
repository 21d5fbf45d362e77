#include "hqmq/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "hqmq/errors.hpp"
#include "hqmq/half.hpp"

namespace hqmq {

double lower_median(std::span<const double> values) {
    HQMQ_THROW_IF_NOT(!values.empty(), InvalidArgument, "median of an empty batch");
    std::vector<double> v(values.begin(), values.end());
    auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

HalfQuad to_half_quad(const Quaternion& q) {
    HalfQuad h{};
    const auto c = q.to_array();
    for (std::size_t i = 0; i < 4; ++i) {
        if (!(std::abs(c[i]) <= kHalfMax)) {
            throw InvalidArgument("outlier component outside the binary16 range");
        }
        h[i] = half_from_double(c[i]);
    }
    return h;
}

Quaternion from_half_quad(const HalfQuad& h) {
    return {half_to_double(h[0]), half_to_double(h[1]), half_to_double(h[2]),
            half_to_double(h[3])};
}

ExtractionResult extract(std::span<const Quaternion> chunks, const OutlierPolicy& policy) {
    HQMQ_THROW_IF_NOT(!chunks.empty(), InvalidArgument, "outlier extraction on an empty batch");
    HQMQ_THROW_IF_NOT(policy.multiplier > 0.0, InvalidArgument, "outlier multiplier must be > 0");

    std::vector<double> norms(chunks.size());
    std::transform(chunks.begin(), chunks.end(), norms.begin(),
                   [](const Quaternion& q) { return norm(q); });

    ExtractionResult res;
    res.r_med = lower_median(norms);
    res.small_batch = chunks.size() < kStableBatchChunks;
    if (res.small_batch) {
        std::clog << "hqmq: warning: outlier median over " << chunks.size()
                  << " chunks (< " << kStableBatchChunks << ") may be unstable\n";
    }

    const double threshold = policy.multiplier * res.r_med;
    res.flags.assign(chunks.size(), 0);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (norms[i] > threshold) {
            res.flags[i] = 1;
            res.payloads.push_back(to_half_quad(chunks[i]));
        }
    }
    res.fraction = static_cast<double>(res.payloads.size()) / static_cast<double>(chunks.size());
    return res;
}

double effective_bits(double b_hqmq, double p, int d_chunk) {
    HQMQ_THROW_IF_NOT(p >= 0.0 && p <= 1.0, InvalidArgument, "outlier fraction must be in [0, 1]");
    HQMQ_THROW_IF_NOT(d_chunk > 0, InvalidArgument, "chunk dimension must be positive");
    return (1.0 - p) * b_hqmq + p * 16.0 + 1.0 / d_chunk;
}

} // namespace hqmq
