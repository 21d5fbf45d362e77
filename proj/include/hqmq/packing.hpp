#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "hqmq/joint_codebook.hpp"

namespace hqmq {

/// Monte-Carlo estimate of the covering radius: the largest angle from any
/// probe to its nearest codeword. Always a lower bound on the true radius.
struct CoveringEstimate {
    std::size_t secondary_size = 0;
    std::uint64_t seed = 0;
    std::size_t n_probes = 0;
    double rho_hat = 0.0;             ///< radians
    double mean_angular_error = 0.0;  ///< radians
};

inline constexpr std::size_t kMinCoveringProbes = 1000;

/// Probes are the first n_probes haar_sample draws of Xoshiro256(probe_seed),
/// so a longer run sees a superset of a shorter one.
CoveringEstimate estimate_covering(const JointCodebook& jc, std::size_t n_probes,
                                   std::uint64_t probe_seed);

/// Small-angle-stable angle between unit vectors: 2 asin(|a - b| / 2).
double chord_angle(const Quaternion& a, const Quaternion& b);

struct DistinctnessReport {
    std::size_t count = 0;          ///< codewords > tol rad from every earlier codeword
    double min_pairwise_angle = 0.0; ///< radians, over all pairs
};

inline constexpr double kDistinctTolerance = 1e-6;

DistinctnessReport check_distinctness(const JointCodebook& jc, double tol = kDistinctTolerance);

struct RatePoint {
    double log_joint_size = 0.0;
    double log_rho = 0.0;
    double log_mean = 0.0;
};

struct RateFit {
    std::vector<RatePoint> points;
    std::vector<CoveringEstimate> estimates;
    double slope = 0.0;      ///< d log(rho_hat) / d log(24S)
    double intercept = 0.0;
    double residual = 0.0;   ///< RMS of the rho_hat fit
    double mean_slope = 0.0; ///< same fit for the mean angular error
};

/// Least-squares slope and intercept of y on x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};
LineFit least_squares(std::span<const double> x, std::span<const double> y);

using SecondaryFactory = std::function<SecondaryCodebook(std::size_t S)>;

/// Fit covering radius against joint codebook size. By default the
/// secondary codebook for each S is build_secondary(seed, 0, 0, K, S), so
/// the codebooks are nested prefixes of one stream.
RateFit fit_covering_rate(std::span<const std::size_t> secondary_sizes, std::uint64_t seed,
                          std::size_t n_probes, std::uint64_t probe_seed = 0x5EED,
                          const SecondaryFactory& factory = {});

struct SeedVariance {
    std::vector<double> per_seed_mean; ///< mean angular error per seed, radians
    double mean = 0.0;
    double cov = 0.0; ///< population std / mean
};

/// Mean angular quantization error of a fixed direction sample under the
/// joint codebook built from each seed (layer 0, head 0, role K).
SeedVariance seed_variance(std::size_t secondary_size, std::span<const std::uint64_t> seeds,
                           std::span<const Quaternion> directions);

/// `n` Haar directions from Xoshiro256(seed).
std::vector<Quaternion> haar_directions(std::size_t n, std::uint64_t seed);

/// Header: S,seed,n_probes,rho_hat_rad,mean_rad
void write_covering_csv(std::ostream& os, std::span<const CoveringEstimate> rows);

} // namespace hqmq
