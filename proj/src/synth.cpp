#include "hqmq/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "hqmq/baselines.hpp"
#include "hqmq/bit_budget.hpp"
#include "hqmq/errors.hpp"
#include "hqmq/outlier.hpp"

namespace hqmq {

namespace {

constexpr std::uint64_t kBaseStream = 0xDA7A;
constexpr std::uint64_t kSlotStream = 0x5107;
constexpr std::uint64_t kMultiplierStream = 0x3417;

std::vector<std::size_t> pick_slots(std::size_t nc, std::size_t count, Xoshiro256& rng) {
    std::vector<std::size_t> idx(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        idx[i] = i;
    }
    // Partial Fisher-Yates, spelled out so the choice does not depend on the
    // standard library's shuffle.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next() % (nc - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

void scale_chunk(std::span<double> data, std::size_t row, std::size_t c, std::size_t d, double f) {
    for (std::size_t k = 0; k < 4 && 4 * c + k < d; ++k) {
        data[row * d + 4 * c + k] *= f;
    }
}

double parse_number(std::string_view s, std::string_view label) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw InvalidArgument("bad number in sweep config '" + std::string(label) + "'");
    }
    return v;
}

} // namespace

SynthProfile SynthProfile::gaussian() {
    return SynthProfile{};
}

SynthProfile SynthProfile::outlier_heavy() {
    SynthProfile p;
    p.kind = SynthKind::OutlierHeavy;
    p.ratio_band = std::pair{80.0, 280.0};
    return p;
}

std::vector<double> chunk_norms(std::span<const double> data, const TensorShape& shape) {
    HQMQ_THROW_IF_NOT(data.size() == shape.num_elements(), InvalidArgument,
                      "data length does not match shape");
    const std::size_t d = shape.head_dim;
    std::vector<double> out;
    out.reserve(shape.num_chunks());
    for (std::size_t row = 0; row < shape.rows(); ++row) {
        for (const Quaternion& q : chunk(data.subspan(row * d, d))) {
            out.push_back(norm(q));
        }
    }
    return out;
}

double max_median_ratio(std::span<const double> data, const TensorShape& shape) {
    const auto norms = chunk_norms(data, shape);
    const double med = lower_median(norms);
    return *std::max_element(norms.begin(), norms.end()) / med;
}

std::vector<double> gen_chunks(const SynthProfile& profile, const TensorShape& shape,
                               std::uint64_t seed) {
    HQMQ_THROW_IF_NOT(profile.base_std >= 0.0, InvalidArgument, "base_std must be >= 0");
    std::vector<double> data(shape.num_elements());
    Xoshiro256 base(derive_seed(seed, {kBaseStream}));
    for (double& x : data) {
        x = profile.base_mean + profile.base_std * base.gaussian();
    }
    if (profile.kind == SynthKind::Gaussian || data.empty()) {
        return data;
    }

    HQMQ_THROW_IF_NOT(profile.outlier_chunk_fraction > 0.0 && profile.outlier_chunk_fraction <= 1.0 &&
                          profile.median_multiplier > 0.0 && profile.sigma_log >= 0.0,
                      InvalidArgument, "invalid outlier profile parameters");
    const std::size_t nc = shape.chunks_per_vector();
    const std::size_t d = shape.head_dim;
    const std::size_t count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(profile.outlier_chunk_fraction * nc)), 1, nc);

    // (row, chunk) of every outlier chunk, in chunk order.
    std::vector<std::pair<std::size_t, std::size_t>> outliers;
    Xoshiro256 mult_rng(derive_seed(seed, {kMultiplierStream}));
    const double log_med = std::log(profile.median_multiplier);
    std::vector<std::vector<std::size_t>> slots(shape.heads);
    for (std::size_t h = 0; h < shape.heads; ++h) {
        Xoshiro256 slot_rng(derive_seed(seed, {kSlotStream, h}));
        slots[h] = pick_slots(nc, count, slot_rng);
    }
    for (std::size_t b = 0; b < shape.batch; ++b) {
        for (std::size_t h = 0; h < shape.heads; ++h) {
            for (std::size_t t = 0; t < shape.tokens; ++t) {
                const std::size_t row = shape.row_index(b, h, t);
                for (std::size_t c : slots[h]) {
                    const auto q = chunk(std::span<const double>(data).subspan(row * d, d))[c];
                    const double r = norm(q);
                    const double m = std::exp(log_med + profile.sigma_log * mult_rng.gaussian());
                    if (r > 0.0) {
                        scale_chunk(data, row, c, d, m * kChi4Median / r);
                    }
                    outliers.emplace_back(row, c);
                }
            }
        }
    }

    if (profile.ratio_band) {
        const auto [lo, hi] = *profile.ratio_band;
        HQMQ_THROW_IF_NOT(lo > 0.0 && hi >= lo, InvalidArgument, "invalid ratio band");
        const double target = std::sqrt(lo * hi);
        for (int iter = 0; iter < 16; ++iter) {
            const double ratio = max_median_ratio(data, shape);
            if (std::abs(ratio / target - 1.0) < 1e-3) {
                break;
            }
            for (const auto& [row, c] : outliers) {
                scale_chunk(data, row, c, d, target / ratio);
            }
        }
    }
    return data;
}

DistortionReport measure(std::string label, double bits_per_element, std::span<const double> original,
                         std::span<const double> decoded, const TensorShape& shape) {
    HQMQ_THROW_IF_NOT(original.size() == shape.num_elements() && decoded.size() == original.size(),
                      InvalidArgument, "distortion inputs do not match shape");
    DistortionReport rep;
    rep.label = std::move(label);
    rep.bits_per_element = bits_per_element;

    double err2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t i = 0; i < original.size(); ++i) {
        err2 += (original[i] - decoded[i]) * (original[i] - decoded[i]);
        ref2 += original[i] * original[i];
    }
    rep.rel_frob = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);

    const std::size_t d = shape.head_dim;
    std::vector<double> angles;
    angles.reserve(shape.num_chunks());
    for (std::size_t row = 0; row < shape.rows(); ++row) {
        const auto a = chunk(original.subspan(row * d, d));
        const auto b = chunk(decoded.subspan(row * d, d));
        for (std::size_t c = 0; c < a.size(); ++c) {
            angles.push_back(chunk_angle(a[c], b[c]));
        }
    }
    if (!angles.empty()) {
        double sum = 0.0;
        for (double a : angles) {
            sum += a;
        }
        rep.mean_angle = sum / static_cast<double>(angles.size());
        const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(angles.size()))) - 1;
        std::nth_element(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(k), angles.end());
        rep.p95_angle = angles[k];
    }
    return rep;
}

SweepConfig parse_sweep_config(std::string_view label) {
    SweepConfig cfg;
    cfg.label = std::string(label);
    std::string_view rest = label;

    const auto med = rest.find("_med");
    if (med != std::string_view::npos) {
        cfg.outlier_multiplier = parse_number(rest.substr(med + 4), label);
        HQMQ_THROW_IF_NOT(*cfg.outlier_multiplier > 0.0, InvalidArgument, "outlier multiplier must be > 0");
        rest = rest.substr(0, med);
    }

    if (rest.starts_with("hqmq_")) {
        const ConfigName n = parse_config_name(rest.substr(5));
        cfg.method = SweepConfig::Method::Hqmq;
        cfg.secondary_size = n.secondary_size;
        cfg.radius_bits = n.radius_bits;
    } else if (rest.starts_with("int")) {
        cfg.method = SweepConfig::Method::NaiveInt;
        cfg.int_bits = static_cast<int>(parse_number(rest.substr(3), label));
        HQMQ_THROW_IF_NOT(cfg.int_bits >= 2 && cfg.int_bits <= 16, InvalidArgument,
                          "naive int bits must be in [2, 16]");
    } else if (rest.starts_with("addvq_k")) {
        HQMQ_THROW_IF_NOT(!cfg.outlier_multiplier, InvalidArgument,
                          "additive VQ does not take outlier extraction");
        const auto r = rest.find("_r");
        HQMQ_THROW_IF_NOT(r != std::string_view::npos, InvalidArgument,
                          "additive config must look like addvq_kK_rM");
        cfg.method = SweepConfig::Method::Additive;
        cfg.additive_k = static_cast<std::size_t>(parse_number(rest.substr(7, r - 7), label));
        cfg.radius_bits = static_cast<int>(parse_number(rest.substr(r + 2), label));
        HQMQ_THROW_IF_NOT(cfg.additive_k >= 1 && cfg.radius_bits >= 1 && cfg.radius_bits <= 8,
                          InvalidArgument, "bad additive config");
    } else {
        throw InvalidArgument("unknown sweep config '" + std::string(label) + "'");
    }
    return cfg;
}

DistortionReport run_config(const SweepConfig& cfg, std::span<const double> data,
                            const TensorShape& shape, std::uint64_t seed) {
    switch (cfg.method) {
    case SweepConfig::Method::Hqmq: {
        CodecConfig cc;
        cc.secondary_size = cfg.secondary_size;
        cc.radius_bits = cfg.radius_bits;
        cc.seed = seed;
        cc.outlier_multiplier = cfg.outlier_multiplier;
        const CodebookSet books(cc, shape.heads);
        const QuantizedTensor qt = encode_tensor(data, shape, cc, books);
        const auto decoded = decode_tensor(qt, books);
        const double base =
            budget(cfg.secondary_size, cfg.radius_bits, shape.head_dim, BitMode::Fractional).per_element_bits;
        const double p = qt.outlier_fraction();
        const double bits = cfg.outlier_multiplier ? effective_bits(base, p) : base;
        DistortionReport rep = measure(cfg.label, bits, data, decoded, shape);
        rep.outlier_p = p;
        return rep;
    }
    case SweepConfig::Method::NaiveInt: {
        const auto res = naive_int_roundtrip(data, shape, {cfg.int_bits, cfg.outlier_multiplier});
        const double bits = cfg.outlier_multiplier ? effective_bits(cfg.int_bits, res.outlier_fraction)
                                                   : static_cast<double>(cfg.int_bits);
        DistortionReport rep = measure(cfg.label, bits, data, res.data, shape);
        rep.outlier_p = res.outlier_fraction;
        return rep;
    }
    case SweepConfig::Method::Additive: {
        const auto decoded = additive_vq_roundtrip(data, shape, cfg.additive_k, cfg.radius_bits, seed);
        const double bits = AdditiveCodebookPair::bits_per_chunk(cfg.additive_k, cfg.radius_bits) / 4.0;
        return measure(cfg.label, bits, data, decoded, shape);
    }
    }
    throw InvalidArgument("unknown sweep method");
}

std::vector<DistortionReport> pareto_sweep(std::span<const std::string> labels,
                                           const SynthProfile& profile, const TensorShape& shape,
                                           std::uint64_t seed) {
    std::vector<SweepConfig> configs;
    for (const auto& l : labels) {
        configs.push_back(parse_sweep_config(l));
    }
    const auto data = gen_chunks(profile, shape, seed);
    std::vector<DistortionReport> out;
    for (const auto& c : configs) {
        out.push_back(run_config(c, data, shape, seed));
    }
    return out;
}

std::vector<OutlierSweepPoint> outlier_sweep(std::span<const double> c_values,
                                             const SynthProfile& profile, const TensorShape& shape,
                                             std::uint32_t secondary_size, int radius_bits,
                                             std::uint64_t seed) {
    HQMQ_THROW_IF_NOT(std::is_sorted(c_values.begin(), c_values.end()), InvalidArgument,
                      "outlier multipliers must be ascending");
    const auto data = gen_chunks(profile, shape, seed);
    std::vector<OutlierSweepPoint> out;
    for (double c : c_values) {
        HQMQ_THROW_IF_NOT(c > 0.0, InvalidArgument, "outlier multipliers must be positive");
        SweepConfig cfg;
        cfg.method = SweepConfig::Method::Hqmq;
        cfg.secondary_size = secondary_size;
        cfg.radius_bits = radius_bits;
        cfg.outlier_multiplier = c;
        cfg.label = "hqmq_" + config_name(secondary_size, radius_bits) + "_med" + std::to_string(c);
        OutlierSweepPoint pt;
        pt.multiplier = c;
        pt.distortion = run_config(cfg, data, shape, seed);
        pt.fraction = pt.distortion.outlier_p;
        out.push_back(std::move(pt));
    }
    return out;
}

void write_report_csv(std::ostream& os, std::span<const DistortionReport> rows) {
    os << "config,bits_per_element,mean_angle_rad,p95_angle_rad,rel_frob,outlier_p\n";
    const auto old = os.precision(8);
    for (const auto& r : rows) {
        os << r.label << ',' << r.bits_per_element << ',' << r.mean_angle << ',' << r.p95_angle << ','
           << r.rel_frob << ',' << r.outlier_p << '\n';
    }
    os.precision(old);
}

void write_outlier_sweep_csv(std::ostream& os, std::span<const OutlierSweepPoint> rows) {
    os << "C,outlier_p,bits_per_element,mean_angle_rad,p95_angle_rad,rel_frob\n";
    const auto old = os.precision(8);
    for (const auto& r : rows) {
        os << r.multiplier << ',' << r.fraction << ',' << r.distortion.bits_per_element << ','
           << r.distortion.mean_angle << ',' << r.distortion.p95_angle << ',' << r.distortion.rel_frob
           << '\n';
    }
    os.precision(old);
}

} // namespace hqmq
