#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hqmq/codec.hpp"

namespace hqmq {

enum class SynthKind : std::uint8_t { Gaussian, OutlierHeavy };

/// Synthetic K/V-like activations.
///
/// gaussian: i.i.d. N(base_mean, base_std^2) elements.
/// outlier_heavy: the gaussian base, plus per head a seeded set of outlier
/// chunk positions (outlier_chunk_fraction of the chunk slots, at least one).
/// In those slots every token's chunk keeps its direction and gets norm
/// m * r_ref, with m ~ LogNormal(ln median_multiplier, sigma_log) and r_ref
/// the median norm of a standard 4-d Gaussian. If ratio_band is set, the
/// outlier chunks are then rescaled together until the max/median chunk norm
/// ratio sits at the band's geometric centre.
struct SynthProfile {
    SynthKind kind = SynthKind::Gaussian;
    double base_mean = 0.0;
    double base_std = 1.0;
    double outlier_chunk_fraction = 1.0 / 32.0;
    double median_multiplier = 40.0;
    double sigma_log = 0.3;
    std::optional<std::pair<double, double>> ratio_band;

    static SynthProfile gaussian();
    /// Tuned to a max/median chunk-norm ratio in [80, 280].
    static SynthProfile outlier_heavy();
};

/// Median norm of a standard normal 4-vector (chi distribution, 4 dof).
inline constexpr double kChi4Median = 1.8321282651695878;

std::vector<double> gen_chunks(const SynthProfile& profile, const TensorShape& shape,
                               std::uint64_t seed);

/// Norms of every chunk of a (B, H, T, d_h) tensor, in chunk order.
std::vector<double> chunk_norms(std::span<const double> data, const TensorShape& shape);

/// max / lower median of chunk norms.
double max_median_ratio(std::span<const double> data, const TensorShape& shape);

struct DistortionReport {
    std::string label;
    double bits_per_element = 0.0;
    double mean_angle = 0.0; ///< radians, chunk_angle over all chunks
    double p95_angle = 0.0;
    double rel_frob = 0.0;   ///< ||X - X̂||_F / ||X||_F
    double outlier_p = 0.0;
};

/// Angular and Frobenius distortion of a reconstruction.
DistortionReport measure(std::string label, double bits_per_element, std::span<const double> original,
                         std::span<const double> decoded, const TensorShape& shape);

/// A sweep configuration parsed from a label:
///   hqmq_sNN_rM[_medC]   HQMQ, optional Med-C extraction
///   intB[_medC]          naive per-row integer
///   addvq_kK_rM          additive VQ with two K-entry random codebooks
///
/// Reported bits exclude the per-row 16-bit scale that every method carries:
/// HQMQ uses the fractional per-element budget, extraction applies
/// effective_bits with the measured fraction, additive uses
/// (ceil(2 log2 K) + b_r) / 4.
struct SweepConfig {
    enum class Method : std::uint8_t { Hqmq, NaiveInt, Additive } method = Method::Hqmq;
    std::uint32_t secondary_size = 0;
    int radius_bits = 0;
    int int_bits = 0;
    std::size_t additive_k = 0;
    std::optional<double> outlier_multiplier;
    std::string label;
};

SweepConfig parse_sweep_config(std::string_view label);

/// Run one configuration on `data`; codebook seed `seed`, layer 0, role K.
DistortionReport run_config(const SweepConfig& cfg, std::span<const double> data,
                            const TensorShape& shape, std::uint64_t seed);

/// Generate data from the profile once, then run every configuration.
/// Reports come back in input order.
std::vector<DistortionReport> pareto_sweep(std::span<const std::string> labels,
                                           const SynthProfile& profile, const TensorShape& shape,
                                           std::uint64_t seed);

struct OutlierSweepPoint {
    double multiplier = 0.0;
    double fraction = 0.0;
    DistortionReport distortion;
};

/// HQMQ (S, b_r) with Med-C extraction for each C in ascending order.
std::vector<OutlierSweepPoint> outlier_sweep(std::span<const double> c_values,
                                             const SynthProfile& profile, const TensorShape& shape,
                                             std::uint32_t secondary_size, int radius_bits,
                                             std::uint64_t seed);

/// Header: config,bits_per_element,mean_angle_rad,p95_angle_rad,rel_frob,outlier_p
void write_report_csv(std::ostream& os, std::span<const DistortionReport> rows);

/// Header: C,outlier_p,bits_per_element,mean_angle_rad,p95_angle_rad,rel_frob
void write_outlier_sweep_csv(std::ostream& os, std::span<const OutlierSweepPoint> rows);

} // namespace hqmq
