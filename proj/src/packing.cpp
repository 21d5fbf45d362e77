#include "hqmq/packing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "hqmq/errors.hpp"

namespace hqmq {

double chord_angle(const Quaternion& a, const Quaternion& b) {
    const double half_chord = norm(a - b) / 2.0;
    return 2.0 * std::asin(std::min(1.0, half_chord));
}

std::vector<Quaternion> haar_directions(std::size_t n, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<Quaternion> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(haar_sample(rng));
    }
    return out;
}

CoveringEstimate estimate_covering(const JointCodebook& jc, std::size_t n_probes,
                                   std::uint64_t probe_seed) {
    HQMQ_THROW_IF_NOT(n_probes >= kMinCoveringProbes, InvalidArgument,
                      "covering estimate needs at least 1000 probes");
    CoveringEstimate est;
    est.secondary_size = jc.secondary_size();
    est.seed = jc.secondary().seed;
    est.n_probes = n_probes;

    Xoshiro256 rng(probe_seed);
    double sum = 0.0;
    for (std::size_t i = 0; i < n_probes; ++i) {
        const Quaternion u = haar_sample(rng);
        const NearestResult nn = jc.nearest(u);
        const double a = chord_angle(u, jc[nn.flat]);
        est.rho_hat = std::max(est.rho_hat, a);
        sum += a;
    }
    est.mean_angular_error = sum / static_cast<double>(n_probes);
    return est;
}

DistinctnessReport check_distinctness(const JointCodebook& jc, double tol) {
    const auto& cw = jc.codewords();
    DistinctnessReport rep;
    rep.min_pairwise_angle = cw.size() > 1 ? std::numbers::pi : 0.0;
    for (std::size_t i = 0; i < cw.size(); ++i) {
        bool distinct = true;
        for (std::size_t j = 0; j < i; ++j) {
            const double a = chord_angle(cw[i], cw[j]);
            rep.min_pairwise_angle = std::min(rep.min_pairwise_angle, a);
            if (a <= tol) {
                distinct = false;
            }
        }
        rep.count += distinct ? 1 : 0;
    }
    return rep;
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    HQMQ_THROW_IF_NOT(x.size() == y.size() && x.size() >= 2, InvalidArgument,
                      "least squares needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    HQMQ_THROW_IF_NOT(sxx > 0.0, InvalidArgument, "least squares needs distinct x values");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

RateFit fit_covering_rate(std::span<const std::size_t> secondary_sizes, std::uint64_t seed,
                          std::size_t n_probes, std::uint64_t probe_seed,
                          const SecondaryFactory& factory) {
    HQMQ_THROW_IF_NOT(secondary_sizes.size() >= 3, InvalidArgument, "rate fit needs >= 3 sizes");
    const auto [lo, hi] = std::minmax_element(secondary_sizes.begin(), secondary_sizes.end());
    HQMQ_THROW_IF_NOT(*lo >= 1 && *hi >= 4 * *lo, InvalidArgument,
                      "rate fit sizes must span at least two octaves");

    const PrimaryCodebook primary = build_2t();
    RateFit fit;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> ms;
    for (std::size_t S : secondary_sizes) {
        SecondaryCodebook sec = factory ? factory(S) : build_secondary(seed, 0, 0, Role::K, S);
        const JointCodebook jc(primary, std::move(sec));
        CoveringEstimate est = estimate_covering(jc, n_probes, probe_seed);
        est.seed = seed;
        const RatePoint pt{std::log(static_cast<double>(jc.size())), std::log(est.rho_hat),
                           std::log(est.mean_angular_error)};
        fit.points.push_back(pt);
        fit.estimates.push_back(est);
        xs.push_back(pt.log_joint_size);
        ys.push_back(pt.log_rho);
        ms.push_back(pt.log_mean);
    }
    const LineFit rho_fit = least_squares(xs, ys);
    fit.slope = rho_fit.slope;
    fit.intercept = rho_fit.intercept;
    fit.residual = rho_fit.rms;
    fit.mean_slope = least_squares(xs, ms).slope;
    return fit;
}

SeedVariance seed_variance(std::size_t secondary_size, std::span<const std::uint64_t> seeds,
                           std::span<const Quaternion> directions) {
    HQMQ_THROW_IF_NOT(!seeds.empty(), InvalidArgument, "seed variance needs at least one seed");
    HQMQ_THROW_IF_NOT(!directions.empty(), InvalidArgument, "seed variance needs directions");
    const PrimaryCodebook primary = build_2t();
    SeedVariance out;
    for (std::uint64_t seed : seeds) {
        const JointCodebook jc(primary, build_secondary(seed, 0, 0, Role::K, secondary_size));
        double sum = 0.0;
        for (const Quaternion& u : directions) {
            sum += chord_angle(u, jc[jc.nearest(u).flat]);
        }
        out.per_seed_mean.push_back(sum / static_cast<double>(directions.size()));
    }
    const double n = static_cast<double>(out.per_seed_mean.size());
    out.mean = std::accumulate(out.per_seed_mean.begin(), out.per_seed_mean.end(), 0.0) / n;
    double var = 0.0;
    for (double m : out.per_seed_mean) {
        var += (m - out.mean) * (m - out.mean);
    }
    var /= n;
    out.cov = out.mean > 0.0 ? std::sqrt(var) / out.mean : 0.0;
    return out;
}

void write_covering_csv(std::ostream& os, std::span<const CoveringEstimate> rows) {
    os << "S,seed,n_probes,rho_hat_rad,mean_rad\n";
    const auto old_prec = os.precision(12);
    for (const auto& r : rows) {
        os << r.secondary_size << ',' << r.seed << ',' << r.n_probes << ',' << r.rho_hat << ','
           << r.mean_angular_error << '\n';
    }
    os.precision(old_prec);
}

} // namespace hqmq
