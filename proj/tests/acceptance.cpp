// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hqmq/attention.hpp"
#include "hqmq/baselines.hpp"
#include "hqmq/bit_budget.hpp"
#include "hqmq/codec.hpp"
#include "hqmq/errors.hpp"
#include "hqmq/hurwitz.hpp"
#include "hqmq/joint_codebook.hpp"
#include "hqmq/kvpack.hpp"
#include "hqmq/outlier.hpp"
#include "hqmq/packing.hpp"
#include "hqmq/synth.hpp"
#include "oracles.hpp"

#ifndef HQMQ_FIXTURE_DIR
#define HQMQ_FIXTURE_DIR "tests/fixtures"
#endif

using namespace hqmq;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) {
            out_.pass = false;
            if (!failures_.empty()) {
                failures_ += "; ";
            }
            failures_ += what;
        }
    }
    void note(const std::string& s) {
        if (!notes_.empty()) {
            notes_ += ", ";
        }
        notes_ += s;
    }
    Outcome done() {
        out_.detail = notes_;
        if (!out_.pass) {
            out_.detail += (notes_.empty() ? "" : " | ") + std::string("failed: ") + failures_;
        }
        return out_;
    }

private:
    Outcome out_;
    std::string notes_;
    std::string failures_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

nlohmann::json load_golden() {
    std::ifstream in(std::string(HQMQ_FIXTURE_DIR) + "/golden.json");
    if (!in) {
        throw std::runtime_error("missing fixture golden.json");
    }
    return nlohmann::json::parse(in);
}

CodecConfig fixture_config(const nlohmann::json& f) {
    const ConfigName n = parse_config_name(f.at("config").get<std::string>());
    CodecConfig cfg;
    cfg.secondary_size = n.secondary_size;
    cfg.radius_bits = n.radius_bits;
    cfg.seed = f.at("seed").get<std::uint64_t>();
    if (f.contains("outlier_c")) {
        cfg.outlier_multiplier = f.at("outlier_c").get<double>();
    }
    return cfg;
}

// ---------------------------------------------------------------------------

Outcome group_exactness() {
    Checker c;
    const PrimaryCodebook cb = build_2t();
    const GroupReport rep = verify_group(cb);
    c.expect(cb.size() == 24, "size != 24");
    c.expect(rep.closure, "closure");
    c.expect(rep.all_inverses, "inverses");
    c.expect(rep.identity_index == std::optional<std::size_t>{0}, "identity index");
    c.expect(rep.unexpected_angles == 0, "unexpected inner products");
    c.expect(rep.min_angle_deg == 60.0, "min angle");
    std::size_t pairs = 0;
    for (const auto& [deg, n] : rep.angle_histogram) {
        c.expect(deg == 60 || deg == 90 || deg == 120 || deg == 180, "angle " + std::to_string(deg));
        pairs += n;
    }
    c.expect(pairs == 24 * 23, "histogram pair count");
    // Products checked again with the matrix form of the Hamilton product.
    for (std::size_t a = 0; a < 24; ++a) {
        for (std::size_t b = 0; b < 24; ++b) {
            c.expect(cb.index_of(oracle::hamilton_matrix(cb[a], cb[b])).has_value(),
                     "matrix product outside the set");
        }
    }
    c.note("min angle " + fmt("%.3f", rep.min_angle_deg) + " deg");
    c.note(std::to_string(rep.angle_histogram.size()) + " distinct angles");
    return c.done();
}

Outcome codebook_cardinality() {
    Checker c;
    double min_sep = 10.0;
    int books = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (std::size_t S : {24, 96}) {
            const auto jc = build_joint(build_2t(), build_secondary(1000 + seed, 0, 0, Role::K, S));
            const auto rep = check_distinctness(jc);
            c.expect(rep.count == 24 * S, "seed " + std::to_string(1000 + seed) + " S=" + std::to_string(S));
            min_sep = std::min(min_sep, rep.min_pairwise_angle);
            ++books;
        }
    }
    c.note(std::to_string(books) + " codebooks");
    c.note("smallest separation " + fmt("%.3g", min_sep) + " rad");
    return c.done();
}

Outcome covering_rate() {
    Checker c;
    const std::vector<std::size_t> sizes{1, 4, 16, 64, 256};
    const RateFit fit = fit_covering_rate(sizes, 0, 100000);
    c.expect(fit.slope >= -0.40 && fit.slope <= -0.26, "slope " + fmt("%.4f", fit.slope));
    c.note("slope " + fmt("%.4f", fit.slope));
    c.note("mean-error slope " + fmt("%.4f", fit.mean_slope));

    // Spread over further codebook seeds, reported only.
    double lo = fit.slope;
    double hi = fit.slope;
    double sum = 0.0;
    constexpr int kExtraSeeds = 10;
    for (int seed = 1; seed <= kExtraSeeds; ++seed) {
        const double s = fit_covering_rate(sizes, static_cast<std::uint64_t>(seed), 100000).slope;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        sum += s;
    }
    c.note("seeds 1-" + std::to_string(kExtraSeeds) + ": mean " + fmt("%.4f", sum / kExtraSeeds) + " range [" +
           fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "]");

    const PrimaryCodebook cb = build_2t();
    const double grid =
        oracle::grid_covering_radius(std::vector<Quaternion>(cb.entries().begin(), cb.entries().end()), 12);
    const JointCodebook bare = build_joint(build_2t(), make_secondary({{1, 0, 0, 0}}));
    const CoveringEstimate mc = estimate_covering(bare, 1000000, 0xB0A7);
    c.expect(std::abs(grid * kDeg - 45.0) <= 0.5, "grid oracle " + fmt("%.3f", grid * kDeg));
    c.expect(std::abs(mc.rho_hat - grid) * kDeg <= 0.5, "MC vs oracle " + fmt("%.3f", mc.rho_hat * kDeg));
    c.note("bare 24-cell rho_hat " + fmt("%.3f", mc.rho_hat * kDeg) + " deg (grid oracle " +
           fmt("%.3f", grid * kDeg) + ")");
    return c.done();
}

Outcome codec_bounds() {
    Checker c;
    constexpr int kBr = 4;
    const JointCodebook jc = build_joint(build_2t(), build_secondary(42, 0, 0, Role::K, 96));
    const double rho = estimate_covering(jc, 1000000, 0xC0DE).rho_hat;

    Xoshiro256 rng(0xACCE);
    const double half_step = 1.0 / (2.0 * ((1 << kBr) - 1));
    double worst_radius = 0.0;
    double worst_angle = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double sigma = 0.1 + 10.0 * rng.uniform();
        const double r = sigma * rng.uniform();
        const Quaternion x = haar_sample(rng) * r;
        const ChunkCode code = encode_chunk(x, jc, sigma, kBr);
        const Quaternion y = decode_chunk(code, jc, sigma);
        worst_radius = std::max(worst_radius, std::abs(norm(y) - r) / sigma);
        worst_angle = std::max(worst_angle, angle(normalize(x), jc[code.index]));
    }
    c.expect(worst_radius <= half_step + 1e-12, "radius error " + fmt("%.4g", worst_radius));
    c.expect(worst_angle <= rho, "angular error " + fmt("%.4f", worst_angle * kDeg));
    c.note("max radius error " + fmt("%.4f", worst_radius) + " sigma (bound " + fmt("%.4f", half_step) + ")");
    c.note("max angle " + fmt("%.2f", worst_angle * kDeg) + " deg <= rho_hat " + fmt("%.2f", rho * kDeg));

    // Cell-exact tensor: codewords at grid radii, sigma = 1 in every row.
    CodecConfig cfg;
    cfg.seed = 42;
    const CodebookSet books(cfg, 1);
    const TensorShape shape{1, 1, 200, 8};
    std::vector<double> data;
    Xoshiro256 pick(5);
    for (std::size_t t = 0; t < shape.tokens; ++t) {
        const Quaternion a = books[0][pick.next() % books[0].size()];
        const Quaternion b = books[0][pick.next() % books[0].size()] * (double(pick.next() % 16) / 15.0);
        for (const Quaternion& q : {a, b}) {
            for (double v : q.to_array()) {
                data.push_back(v);
            }
        }
    }
    const auto back = decode_tensor(encode_tensor(data, shape, cfg, books), books);
    double worst = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        worst = std::max(worst, std::abs(back[i] - data[i]));
    }
    c.expect(worst <= 1e-9, "cell-exact " + fmt("%.3g", worst));
    c.note("cell-exact max diff " + fmt("%.2g", worst));
    return c.done();
}

Outcome bit_accounting() {
    Checker c;
    struct Row {
        std::uint32_t S;
        int br;
        double per_element;
        double with_scale;
    };
    const Row rows[] = {{24, 3, 3.04, 3.17}, {24, 4, 3.29, 3.42}, {48, 4, 3.54, 3.67},
                        {96, 4, 3.79, 3.92}, {192, 4, 4.04, 4.17}, {192, 6, 4.54, 4.67}};
    for (const Row& r : rows) {
        const BitBudget b = budget(r.S, r.br, 128, BitMode::Fractional);
        c.expect(std::abs(b.per_element_bits - r.per_element) <= 0.01 &&
                     std::abs(b.per_element_with_scale - r.with_scale) <= 0.01,
                 config_name(r.S, r.br));
    }
    c.note("6 table rows");

    const double s24r3 = budget(24, 3, 128, BitMode::Fractional).per_element_with_scale;
    const ModelShape mistral{32, 8, 128};
    const ModelShape llama70{80, 8, 128};
    const double m16 = cache_size_bytes(mistral, 32768, 16);
    const double mq = cache_size_bytes(mistral, 32768, s24r3);
    const double l16 = cache_size_bytes(llama70, 131072, 16);
    const double lq = cache_size_bytes(llama70, 131072, s24r3);
    const auto within = [](double v, double ref) { return std::abs(v / ref - 1.0) <= 0.02; };
    c.expect(within(m16, 4.3e9), "mistral fp16");
    c.expect(within(mq, 850e6), "mistral s24_r3");
    c.expect(within(l16, 43e9), "llama fp16");
    c.expect(within(lq, 8.5e9), "llama s24_r3");
    c.note("mistral " + fmt("%.2f", m16 / 1e9) + " GB -> " + fmt("%.0f", mq / 1e6) + " MB");
    c.note("llama-70b " + fmt("%.2f", l16 / 1e9) + " GB -> " + fmt("%.2f", lq / 1e9) + " GB");
    return c.done();
}

Outcome effective_bits_and_size() {
    Checker c;
    const double eb = effective_bits(3.92, 0.03);
    // 0.97 * 3.92 + 0.48 + 0.25 = 4.5324, which prints as 4.532 at three decimals.
    c.expect(std::abs(eb - 4.5324) <= 1e-12, "effective_bits " + fmt("%.6f", eb));
    c.expect(fmt("%.3f", eb) == "4.532", "three-decimal form");
    c.note("effective_bits(3.92, 0.03) = " + fmt("%.4f", eb));

    const auto golden = load_golden();
    for (const auto& f : golden.at("fixtures")) {
        const std::string name = f.at("raw").get<std::string>();
        const RawTensor raw = load_raw(std::string(HQMQ_FIXTURE_DIR) + "/" + name);
        const CodecConfig cfg = fixture_config(f);
        const QuantizedTensor qt = encode_tensor(raw.data, raw.shape, cfg);
        const double bytes = static_cast<double>(serialize_kvpack(qt).size());

        const double elements = static_cast<double>(raw.shape.num_elements());
        const BitBudget b = budget(cfg.secondary_size, cfg.radius_bits, raw.shape.head_dim, BitMode::Ceiled);
        double per_element = b.per_element_with_scale;
        if (cfg.outlier_multiplier) {
            const double pad = static_cast<double>(raw.shape.chunks_per_vector() * 4) / raw.shape.head_dim;
            // effective_bits counts per stored element; padding scales it.
            per_element = effective_bits(b.per_element_bits / pad, qt.outlier_fraction()) * pad +
                          16.0 / raw.shape.head_dim;
        }
        const double predicted = per_element * elements;
        // Fixed header, section table and checksum, plus < 1 byte of
        // padding per bit-packed section.
        const double overhead = 8.0 * static_cast<double>(kKvpackFixedBytes) + 3.0 * 7.0;
        const double diff = 8.0 * bytes - predicted;
        c.expect(diff >= -1e-6 && diff <= overhead, name + " size off by " + fmt("%.1f", diff) + " bits");
        c.note(name + " " + fmt("%.0f", bytes) + " B (+" + fmt("%.0f", diff) + " bits)");
    }
    return c.done();
}

Outcome outlier_behaviour() {
    Checker c;
    const TensorShape shape{1, 8, 256, 128};
    const SynthProfile prof = SynthProfile::outlier_heavy();
    const auto data = gen_chunks(prof, shape, 2024);
    const double ratio = max_median_ratio(data, shape);
    c.expect(ratio >= 80.0 && ratio <= 280.0, "ratio " + fmt("%.1f", ratio));
    c.note("max/median " + fmt("%.1f", ratio));

    const std::vector<double> cs{2, 3, 4, 5, 100};
    const auto sweep = outlier_sweep(cs, prof, shape, 96, 4, 2024);
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        c.expect(sweep[i].fraction <= sweep[i - 1].fraction, "p not monotone at C=" + fmt("%g", cs[i]));
    }
    const double p3 = sweep[1].fraction;
    c.expect(p3 >= 0.005 && p3 <= 0.05, "p(C=3) " + fmt("%.4f", p3));
    std::string ps;
    for (const auto& pt : sweep) {
        ps += (ps.empty() ? "" : "/") + fmt("%.4f", pt.fraction);
    }
    c.note("p over C{2,3,4,5,100} " + ps);

    const auto none = run_config(parse_sweep_config("hqmq_s96_r4"), data, shape, 2024);
    const auto med3 = sweep[1].distortion;
    c.expect(none.rel_frob >= 5.0 * med3.rel_frob, "frob ratio " + fmt("%.2f", none.rel_frob / med3.rel_frob));
    c.note("frob no-extraction " + fmt("%.4f", none.rel_frob) + " vs Med3 " + fmt("%.4f", med3.rel_frob) +
           " (" + fmt("%.1f", none.rel_frob / med3.rel_frob) + "x)");
    return c.done();
}

Outcome disentanglement() {
    Checker c;
    const TensorShape shape{1, 8, 256, 128};
    {
        const std::vector<std::string> labels{"int4_med3", "hqmq_s192_r4_med3"};
        const auto r = pareto_sweep(labels, SynthProfile::outlier_heavy(), shape, 99);
        c.expect(r[0].mean_angle > r[1].mean_angle, "outlier-heavy angular ordering");
        c.note("outlier_heavy: int4+Med3 " + fmt("%.4f", r[0].mean_angle) + " rad @" +
               fmt("%.2f", r[0].bits_per_element) + "b vs hqmq s192_r4+Med3 " + fmt("%.4f", r[1].mean_angle) +
               " rad @" + fmt("%.2f", r[1].bits_per_element) + "b");
    }
    {
        const std::vector<std::string> labels{"int3", "hqmq_s24_r3"};
        const auto r = pareto_sweep(labels, SynthProfile::gaussian(), shape, 99);
        c.expect(r[1].rel_frob < r[0].rel_frob, "gaussian frobenius ordering");
        c.expect(std::abs(r[1].bits_per_element - r[0].bits_per_element - 0.04) < 0.005, "bit gap");
        c.note("gaussian: int3 " + fmt("%.4f", r[0].rel_frob) + " @" + fmt("%.2f", r[0].bits_per_element) +
               "b vs hqmq s24_r3 " + fmt("%.4f", r[1].rel_frob) + " @" + fmt("%.2f", r[1].bits_per_element) + "b");
    }
    return c.done();
}

Outcome additive_ablation() {
    Checker c;
    const auto dirs = haar_directions(10000, 0xADD5);
    const JointCodebook jc = build_joint(build_2t(), build_secondary(0, 0, 0, Role::K, 24));
    const AdditiveCodebookPair add(24, 0);
    double hq = 0.0;
    double av = 0.0;
    for (const Quaternion& u : dirs) {
        hq += angle(u, jc[jc.nearest(u).flat]);
        const auto m = add.nearest(u);
        av += angle(u, *add.direction(m.i1, m.i2));
    }
    hq /= static_cast<double>(dirs.size());
    av /= static_cast<double>(dirs.size());
    const double hq_bits = budget(24, 3, 128, BitMode::Fractional).per_element_bits;
    const double av_bits = (2.0 * std::log2(24.0) + 3.0) / 4.0;
    c.expect(std::abs(hq_bits - av_bits) < 1e-9, "bits not matched");
    c.expect(hq < av, "HQMQ not better");
    c.note("at " + fmt("%.2f", hq_bits) + " b/elem: hqmq " + fmt("%.2f", hq * kDeg) + " deg vs additive " +
           fmt("%.2f", av * kDeg) + " deg");
    return c.done();
}

Outcome seed_insensitivity() {
    Checker c;
    const auto dirs = haar_directions(100000, 0x5EED5);
    const std::vector<std::uint64_t> seeds{0, 1, 7, 42, 1337};
    const SeedVariance sv = seed_variance(96, seeds, dirs);
    c.expect(sv.cov < 0.02, "CoV " + fmt("%.4f", sv.cov));
    c.note("mean " + fmt("%.3f", sv.mean * kDeg) + " deg, CoV " + fmt("%.3f", 100.0 * sv.cov) + "%");
    return c.done();
}

template <typename Real>
double fused_max_diff(const std::vector<Real>& q, const QuantizedTensor& pk, const QuantizedTensor& pv,
                      const CodebookSet& bk, const CodebookSet& bv, const AttentionConfig& cfg,
                      std::size_t tile) {
    const auto dk = decode_tensor(pk, bk);
    const auto dv = decode_tensor(pv, bv);
    const std::vector<Real> k(dk.begin(), dk.end());
    const std::vector<Real> v(dv.begin(), dv.end());
    const auto ref = reference_attend<Real>(q, k, v, cfg);
    const auto fused = fused_attend<Real>(q, pk, pv, bk, bv, cfg, tile);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(ref[i]) - static_cast<double>(fused[i])));
    }
    return worst;
}

Outcome fused_attention() {
    Checker c;
    AttentionConfig cfg;
    cfg.batch = 1;
    cfg.q_heads = 4;
    cfg.kv_heads = 1;
    cfg.q_tokens = 128;
    cfg.kv_tokens = 128;
    cfg.head_dim = 32;
    cfg.causal = true;

    const TensorShape kv{1, 1, 128, 32};
    const TensorShape qs{1, 4, 128, 32};
    const auto k = gen_chunks(SynthProfile::gaussian(), kv, 1);
    const auto v = gen_chunks(SynthProfile::gaussian(), kv, 2);
    const auto q = gen_chunks(SynthProfile::gaussian(), qs, 3);

    CodecConfig ck;
    ck.secondary_size = 24;
    ck.radius_bits = 4;
    ck.seed = 11;
    CodecConfig cv = ck;
    cv.role = Role::V;
    const CodebookSet bk(ck, 1);
    const CodebookSet bv(cv, 1);
    c.expect(bk[0].size() == 576, "joint size");
    const QuantizedTensor pk = encode_tensor(k, kv, ck, bk);
    const QuantizedTensor pv = encode_tensor(v, kv, cv, bv);

    const std::vector<float> qf(q.begin(), q.end());
    double worst64 = 0.0;
    double worst32 = 0.0;
    for (std::size_t tile : {1, 7, 32, 128}) {
        worst64 = std::max(worst64, fused_max_diff<double>(q, pk, pv, bk, bv, cfg, tile));
        worst32 = std::max(worst32, fused_max_diff<float>(qf, pk, pv, bk, bv, cfg, tile));
    }
    c.expect(worst64 <= 1e-10, "64-bit diff " + fmt("%.3g", worst64));
    c.expect(worst32 <= 1e-3, "32-bit diff " + fmt("%.3g", worst32));

    const auto base = fused_attend<double>(q, pk, pv, bk, bv, cfg, 32);
    double tile_var = 0.0;
    for (std::size_t tile : {1, 7, 128}) {
        const auto o = fused_attend<double>(q, pk, pv, bk, bv, cfg, tile);
        for (std::size_t i = 0; i < o.size(); ++i) {
            tile_var = std::max(tile_var, std::abs(o[i] - base[i]));
        }
    }
    c.expect(tile_var <= 1e-10, "tile variation " + fmt("%.3g", tile_var));
    c.note("max diff 64-bit " + fmt("%.2g", worst64) + ", 32-bit " + fmt("%.2g", worst32));
    c.note("tile spread " + fmt("%.2g", tile_var));
    return c.done();
}

Outcome format_robustness() {
    Checker c;
    const auto golden = load_golden();
    std::size_t corruptions = 0;
    for (const auto& f : golden.at("fixtures")) {
        const std::string name = f.at("raw").get<std::string>();
        const RawTensor raw = load_raw(std::string(HQMQ_FIXTURE_DIR) + "/" + name);
        const QuantizedTensor qt = encode_tensor(raw.data, raw.shape, fixture_config(f));
        const auto bytes = serialize_kvpack(qt);
        const QuantizedTensor back = parse_kvpack(bytes);
        c.expect(back == qt, name + " structural round trip");
        c.expect(serialize_kvpack(back) == bytes, name + " byte round trip");

        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", oracle::crc32(bytes, bytes.size() - 4));
        c.expect(crc == f.at("kvpack_crc32").get<std::string>(), name + " bytes differ from golden (" + crc + ")");
        c.expect(bytes.size() == f.at("kvpack_bytes").get<std::size_t>(), name + " size differs from golden");

        auto bad = bytes;
        for (std::size_t i = 0; i < bad.size(); ++i) {
            bad[i] ^= 0x5A;
            bool caught = false;
            try {
                parse_kvpack(bad);
            } catch (const CorruptData&) {
                caught = true;
            } catch (const Error&) {
            }
            c.expect(caught, name + " corruption at byte " + std::to_string(i) + " not detected");
            bad[i] ^= 0x5A;
            ++corruptions;
        }
    }
    c.note(std::to_string(golden.at("fixtures").size()) + " fixtures byte-identical to golden");
    c.note(std::to_string(corruptions) + " single-byte corruptions detected");
    return c.done();
}

} // namespace

int main(int argc, char** argv) {
    // --expect-fail N (repeatable): criteria known not to hold. They still
    // print FAIL; the exit status is nonzero only if the set of failures
    // differs from the expected set.
    std::vector<int> expected_fail;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--expect-fail" && i + 1 < argc) {
            expected_fail.push_back(std::stoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--expect-fail N]...\n");
            return 2;
        }
    }

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "group exactness", 1, group_exactness},
        {2, "codebook cardinality", 10, codebook_cardinality},
        {3, "covering rate", 300, covering_rate},
        {4, "codec round-trip bounds", 30, codec_bounds},
        {5, "bit accounting", 1, bit_accounting},
        {6, "effective bits and kvpack size", 10, effective_bits_and_size},
        {7, "outlier behaviour", 120, outlier_behaviour},
        {8, "disentanglement", 120, disentanglement},
        {9, "additive ablation", 300, additive_ablation},
        {10, "seed insensitivity", 60, seed_insensitivity},
        {11, "fused attention oracle", 30, fused_attention},
        {12, "format robustness", 10, format_robustness},
    };

    int failed = 0;
    int surprises = 0;
    for (const auto& cr : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > cr.budget_s) {
            o.pass = false;
            o.detail += " | over time budget of " + fmt("%g", cr.budget_s) + " s";
        }
        failed += o.pass ? 0 : 1;
        const bool expected =
            std::find(expected_fail.begin(), expected_fail.end(), cr.id) != expected_fail.end();
        if (o.pass == expected) {
            ++surprises;
            if (expected) {
                o.detail += " | listed as expected failure";
            }
        }
        std::printf("%s %2d %-32s %8.2fs  %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed", static_cast<int>(criteria.size()) - failed, criteria.size());
    if (!expected_fail.empty()) {
        std::printf(" (%zu listed as expected failures)", expected_fail.size());
    }
    std::printf("\n");
    return surprises;
}
