#include "hqmq/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "hqmq/errors.hpp"
#include "hqmq/half.hpp"
#include "hqmq/outlier.hpp"
#include "hqmq/scalar_quant.hpp"

namespace hqmq {

namespace {

void check_shape(std::span<const double> data, const TensorShape& shape) {
    HQMQ_THROW_IF_NOT(data.size() == shape.num_elements(), InvalidArgument,
                      "data length does not match shape");
}

// binary16 scale as stored; falls back to 1 when it rounds to zero.
double stored_scale(double s) {
    const double h = round_to_half(s);
    HQMQ_THROW_IF_NOT(!std::isinf(h), InvalidArgument, "row scale exceeds the binary16 range");
    return h > 0.0 ? h : 1.0;
}

constexpr double kDegenerateSum = 1e-9;

} // namespace

NaiveIntResult naive_int_roundtrip(std::span<const double> data, const TensorShape& shape,
                                   const NaiveIntConfig& cfg) {
    HQMQ_THROW_IF_NOT(cfg.bits >= 2 && cfg.bits <= 16, InvalidArgument, "naive int bits must be >= 2");
    check_shape(data, shape);

    const std::size_t d = shape.head_dim;
    const std::size_t nc = shape.chunks_per_vector();

    // Element-level outlier mask derived from chunk flags.
    std::vector<std::uint8_t> keep(data.size(), 0);
    NaiveIntResult res;
    if (cfg.outlier_multiplier && shape.rows() > 0) {
        std::vector<Quaternion> chunks;
        chunks.reserve(shape.num_chunks());
        for (std::size_t row = 0; row < shape.rows(); ++row) {
            auto c = chunk(data.subspan(row * d, d));
            chunks.insert(chunks.end(), c.begin(), c.end());
        }
        const auto ex = extract(chunks, OutlierPolicy{*cfg.outlier_multiplier});
        res.outlier_fraction = ex.fraction;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (!ex.flags[i]) {
                continue;
            }
            const std::size_t row = i / nc;
            const std::size_t c = i % nc;
            for (std::size_t k = 0; k < 4 && 4 * c + k < d; ++k) {
                keep[row * d + 4 * c + k] = 1;
            }
        }
    }

    const double qmax = std::ldexp(1.0, cfg.bits - 1) - 1.0;
    const double qmin = -std::ldexp(1.0, cfg.bits - 1);
    res.data.assign(data.size(), 0.0);
    for (std::size_t row = 0; row < shape.rows(); ++row) {
        const std::size_t base = row * d;
        double mx = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            if (!keep[base + i]) {
                mx = std::max(mx, std::abs(data[base + i]));
            }
        }
        const double scale = mx > 0.0 ? stored_scale(mx) : 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double x = data[base + i];
            if (keep[base + i]) {
                res.data[base + i] = round_to_half(x);
            } else if (scale > 0.0) {
                const double q = std::clamp(std::round(x / scale * qmax), qmin, qmax);
                res.data[base + i] = q * scale / qmax;
            }
        }
    }
    return res;
}

AdditiveCodebookPair::AdditiveCodebookPair(std::size_t K, std::uint64_t seed) : k_(K) {
    HQMQ_THROW_IF_NOT(K >= 1, InvalidArgument, "additive codebook size must be >= 1");
    Xoshiro256 rng1(derive_seed(seed, {0xADD, 1}));
    Xoshiro256 rng2(derive_seed(seed, {0xADD, 2}));
    for (std::size_t i = 0; i < K; ++i) {
        first_.push_back(haar_sample(rng1));
        second_.push_back(haar_sample(rng2));
    }
    directions_.resize(K * K);
    valid_.assign(K * K, 0);
    for (std::size_t i1 = 0; i1 < K; ++i1) {
        for (std::size_t i2 = 0; i2 < K; ++i2) {
            const Quaternion a = first_[i1];
            const Quaternion b = second_[i2];
            const Quaternion sum{a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z};
            const double n = norm(sum);
            if (n > kDegenerateSum) {
                directions_[i1 * K + i2] = sum * (1.0 / n);
                valid_[i1 * K + i2] = 1;
            }
        }
    }
}

std::optional<Quaternion> AdditiveCodebookPair::direction(std::size_t i1, std::size_t i2) const {
    const std::size_t k = i1 * k_ + i2;
    if (!valid_[k]) {
        return std::nullopt;
    }
    return directions_[k];
}

AdditiveCodebookPair::Match AdditiveCodebookPair::nearest(const Quaternion& u) const {
    Match best;
    std::size_t best_k = directions_.size();
    for (std::size_t k = 0; k < directions_.size(); ++k) {
        if (!valid_[k]) {
            continue;
        }
        const double ip = dot(u, directions_[k]);
        if (ip > best.cosine) {
            best.cosine = ip;
            best_k = k;
        }
    }
    HQMQ_THROW_IF_NOT(best_k < directions_.size(), InvalidArgument,
                      "additive codebook has no usable pair");
    best.i1 = best_k / k_;
    best.i2 = best_k % k_;
    best.cosine = std::clamp(best.cosine, -1.0, 1.0);
    return best;
}

double AdditiveCodebookPair::bits_per_chunk(std::size_t K, int radius_bits) {
    return std::ceil(2.0 * std::log2(static_cast<double>(K))) + radius_bits;
}

std::vector<double> additive_vq_roundtrip(std::span<const double> data, const TensorShape& shape,
                                          const AdditiveCodebookPair& books, int radius_bits) {
    check_shape(data, shape);
    const std::size_t d = shape.head_dim;
    std::vector<double> out(data.size(), 0.0);
    std::vector<double> norms;
    for (std::size_t row = 0; row < shape.rows(); ++row) {
        const auto chunks = chunk(data.subspan(row * d, d));
        norms.clear();
        for (const Quaternion& q : chunks) {
            norms.push_back(norm(q));
        }
        const double sigma = stored_scale(token_scale(norms).sigma);
        for (std::size_t c = 0; c < chunks.size(); ++c) {
            const RadiusCode rc = quantize_radius(norms[c], sigma, radius_bits);
            if (rc.quantum == 0) {
                continue;
            }
            const auto m = books.nearest(chunks[c] * (1.0 / norms[c]));
            const Quaternion q = *books.direction(m.i1, m.i2) * dequantize_radius(rc, sigma);
            for (std::size_t k = 0; k < 4 && 4 * c + k < d; ++k) {
                out[row * d + 4 * c + k] = q[static_cast<int>(k)];
            }
        }
    }
    return out;
}

std::vector<double> additive_vq_roundtrip(std::span<const double> data, const TensorShape& shape,
                                          std::size_t K, int radius_bits, std::uint64_t seed) {
    return additive_vq_roundtrip(data, shape, AdditiveCodebookPair(K, seed), radius_bits);
}

} // namespace hqmq
