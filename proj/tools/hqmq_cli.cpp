// hqmq command-line front end.
//
// Exit status: 0 success, 1 failed check (verify-group), 2 bad arguments,
// 3 bad or inconsistent data.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hqmq/bit_budget.hpp"
#include "hqmq/codec.hpp"
#include "hqmq/errors.hpp"
#include "hqmq/hurwitz.hpp"
#include "hqmq/kvpack.hpp"
#include "hqmq/packing.hpp"
#include "hqmq/synth.hpp"

namespace fs = std::filesystem;
using namespace hqmq;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

// Problems with the command line itself, as opposed to the data.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename F>
auto arg(F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) {
        throw UsageError("no such file: " + path);
    }
}

TensorShape parse_shape(const std::string& s) {
    std::vector<std::uint32_t> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long n = std::stoul(part, &used);
            HQMQ_THROW_IF_NOT(used == part.size(), InvalidArgument, "bad shape '" + s + "'");
            v.push_back(static_cast<std::uint32_t>(n));
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad shape '" + s + "'");
        }
    }
    HQMQ_THROW_IF_NOT(v.size() == 4 && v[0] >= 1 && v[1] >= 1 && v[3] >= 1, InvalidArgument,
                      "shape must be B,H,T,D with B, H, D >= 1");
    return {v[0], v[1], v[2], v[3]};
}

SynthProfile parse_profile(const std::string& s) {
    if (s == "gaussian") {
        return SynthProfile::gaussian();
    }
    if (s == "outlier_heavy") {
        return SynthProfile::outlier_heavy();
    }
    throw InvalidArgument("unknown profile '" + s + "' (gaussian | outlier_heavy)");
}

// Writes to --out if given, otherwise stdout.
template <typename F>
void emit(const std::string& out, F&& write) {
    if (out.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream f(out, std::ios::trunc);
    if (!f) {
        throw UsageError("cannot create " + out);
    }
    write(f);
}

void update_manifest(const fs::path& manifest, const QuantizedTensor& qt, const fs::path& file) {
    Manifest m = load_manifest(manifest);
    const fs::path base = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
    const ManifestEntry e = manifest_entry(qt, fs::proximate(file, base).generic_string());
    auto same = [&](const ManifestEntry& x) {
        return x.layer == e.layer && x.head_offset == e.head_offset && x.role == e.role;
    };
    auto it = std::find_if(m.members.begin(), m.members.end(), same);
    if (it != m.members.end()) {
        *it = e;
    } else {
        m.members.push_back(e);
    }
    save_manifest(m, manifest);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hurwitz quaternion multiplicative quantization toolkit"};
    app.require_subcommand(1);

    // quantize
    std::string q_in;
    std::string q_out;
    std::string q_manifest;
    std::uint32_t q_S = 96;
    int q_br = 4;
    std::uint64_t q_seed = 0;
    std::optional<double> q_c;
    std::string q_role = "K";
    std::uint32_t q_layer = 0;
    std::uint32_t q_head = 0;
    std::string q_pooling = "across";
    auto* quant = app.add_subcommand("quantize", "raw tensor (KVRW) -> kvpack");
    quant->add_option("--in", q_in, "input raw tensor")->required();
    quant->add_option("--out", q_out, "output kvpack")->required();
    quant->add_option("--S", q_S, "secondary codebook size")->check(CLI::PositiveNumber);
    quant->add_option("--br", q_br, "radius bits")->check(CLI::Range(kMinRadiusBits, kMaxRadiusBits));
    quant->add_option("--seed", q_seed, "codebook seed");
    quant->add_option("--outlier-c", q_c, "enable Med-C extraction with this multiplier")
        ->check(CLI::PositiveNumber);
    quant->add_option("--role", q_role, "K or V")->check(CLI::IsMember({"K", "V", "k", "v"}));
    quant->add_option("--layer", q_layer, "layer index");
    quant->add_option("--head", q_head, "global index of the tensor's first head");
    quant->add_option("--pooling", q_pooling, "outlier median pooling: across | per-head")
        ->check(CLI::IsMember({"across", "per-head"}));
    quant->add_option("--manifest", q_manifest, "add or update this file in a JSON manifest");

    // dequantize
    std::string d_in;
    std::string d_out;
    std::string d_dtype = "f32";
    auto* dequant = app.add_subcommand("dequantize", "kvpack -> raw tensor (KVRW)");
    dequant->add_option("--in", d_in, "input kvpack")->required();
    dequant->add_option("--out", d_out, "output raw tensor")->required();
    dequant->add_option("--dtype", d_dtype, "f32 | f16")->check(CLI::IsMember({"f32", "f16"}));

    // bench
    std::string b_profile = "gaussian";
    std::vector<std::string> b_configs{"int2", "int3", "int4", "hqmq_s24_r3", "hqmq_s48_r4", "hqmq_s96_r4",
                                       "hqmq_s192_r4", "hqmq_s192_r6"};
    std::string b_shape = "1,8,256,128";
    std::uint64_t b_seed = 0;
    std::string b_out;
    auto* bench = app.add_subcommand("bench", "distortion report for a list of configs (CSV)");
    bench->add_option("--profile", b_profile, "gaussian | outlier_heavy");
    bench->add_option("--configs", b_configs, "hqmq_sNN_rM[_medC], intB[_medC], addvq_kK_rM")->delimiter(',');
    bench->add_option("--shape", b_shape, "B,H,T,D");
    bench->add_option("--seed", b_seed, "data and codebook seed");
    bench->add_option("--out", b_out, "CSV file (default stdout)");

    // sweep
    std::string s_profile = "outlier_heavy";
    std::string s_config = "s96_r4";
    std::vector<double> s_c{2, 3, 4, 5, 100};
    std::string s_shape = "1,8,256,128";
    std::uint64_t s_seed = 0;
    std::string s_out;
    auto* sweep = app.add_subcommand("sweep", "outlier-multiplier sweep (CSV)");
    sweep->add_option("--profile", s_profile, "gaussian | outlier_heavy");
    sweep->add_option("--config", s_config, "sNN_rM");
    sweep->add_option("--c", s_c, "ascending multipliers")->delimiter(',');
    sweep->add_option("--shape", s_shape, "B,H,T,D");
    sweep->add_option("--seed", s_seed, "data and codebook seed");
    sweep->add_option("--out", s_out, "CSV file (default stdout)");

    // covering
    std::vector<std::size_t> c_sizes{1, 4, 16, 64, 256};
    std::uint64_t c_seed = 0;
    std::size_t c_probes = 100000;
    std::uint64_t c_probe_seed = 0x5EED;
    std::string c_out;
    auto* covering = app.add_subcommand("covering", "Monte-Carlo covering radius and rate fit (CSV)");
    covering->add_option("--S", c_sizes, "secondary sizes")->delimiter(',');
    covering->add_option("--seed", c_seed, "codebook seed");
    covering->add_option("--probes", c_probes, "Haar probes per codebook");
    covering->add_option("--probe-seed", c_probe_seed, "probe stream seed");
    covering->add_option("--out", c_out, "CSV file (default stdout)");

    // bits
    std::string bits_config;
    std::uint32_t bits_dh = 128;
    auto* bits = app.add_subcommand("bits", "bit budget of a configuration");
    bits->add_option("--config", bits_config, "sNN_rM")->required();
    bits->add_option("--dh", bits_dh, "head dimension")->check(CLI::Range(4u, 1u << 20));

    auto* verify = app.add_subcommand("verify-group", "exhaustive checks of the 24-element primary group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*quant) {
            require_file(q_in);
            const RawTensor raw = load_raw(q_in);
            CodecConfig cfg;
            cfg.secondary_size = q_S;
            cfg.radius_bits = q_br;
            cfg.seed = q_seed;
            cfg.layer = q_layer;
            cfg.head_offset = q_head;
            cfg.role = parse_role(q_role);
            cfg.outlier_multiplier = q_c;
            cfg.pooling = q_pooling == "per-head" ? MedianPooling::PerHead : MedianPooling::AcrossHeads;
            const QuantizedTensor qt = encode_tensor(raw.data, raw.shape, cfg);
            save_kvpack(qt, q_out);
            if (!q_manifest.empty()) {
                update_manifest(q_manifest, qt, q_out);
            }
            std::cerr << "wrote " << fs::file_size(q_out) << " bytes";
            if (qt.extraction_enabled()) {
                std::cerr << ", outlier fraction " << qt.outlier_fraction();
            }
            std::cerr << '\n';
        } else if (*dequant) {
            require_file(d_in);
            const QuantizedTensor qt = load_kvpack(d_in);
            RawTensor raw{qt.shape, d_dtype == "f16" ? RawDType::F16 : RawDType::F32, decode_tensor(qt)};
            save_raw(raw, d_out);
        } else if (*bench) {
            const SynthProfile profile = arg([&] { return parse_profile(b_profile); });
            const TensorShape shape = arg([&] { return parse_shape(b_shape); });
            arg([&] {
                for (const auto& c : b_configs) {
                    parse_sweep_config(c);
                }
                return 0;
            });
            const auto rows = pareto_sweep(b_configs, profile, shape, b_seed);
            emit(b_out, [&](std::ostream& os) { write_report_csv(os, rows); });
        } else if (*sweep) {
            const ConfigName n = arg([&] { return parse_config_name(s_config); });
            const SynthProfile profile = arg([&] { return parse_profile(s_profile); });
            const TensorShape shape = arg([&] { return parse_shape(s_shape); });
            if (!std::is_sorted(s_c.begin(), s_c.end()) || s_c.empty() || s_c.front() <= 0.0) {
                throw UsageError("--c must be positive and ascending");
            }
            const auto rows = outlier_sweep(s_c, profile, shape, n.secondary_size, n.radius_bits, s_seed);
            emit(s_out, [&](std::ostream& os) { write_outlier_sweep_csv(os, rows); });
        } else if (*covering) {
            std::sort(c_sizes.begin(), c_sizes.end());
            if (c_sizes.empty() || c_sizes.front() == 0 || c_probes < kMinCoveringProbes) {
                throw UsageError("--S values must be >= 1 and --probes >= 1000");
            }
            std::vector<CoveringEstimate> rows;
            std::optional<RateFit> fit;
            if (c_sizes.size() >= 3 && c_sizes.back() >= 4 * c_sizes.front()) {
                fit = fit_covering_rate(c_sizes, c_seed, c_probes, c_probe_seed);
                rows = fit->estimates;
            } else {
                for (std::size_t S : c_sizes) {
                    const auto jc = build_joint(build_2t(), build_secondary(c_seed, 0, 0, Role::K, S));
                    rows.push_back(estimate_covering(jc, c_probes, c_probe_seed));
                }
            }
            emit(c_out, [&](std::ostream& os) { write_covering_csv(os, rows); });
            if (fit) {
                std::fprintf(stderr, "slope %.4f (rho_hat), %.4f (mean); target -1/3\n", fit->slope,
                             fit->mean_slope);
            }
        } else if (*bits) {
            const ConfigName n = arg([&] { return parse_config_name(bits_config); });
            const BitBudget fr = budget(n.secondary_size, n.radius_bits, bits_dh, BitMode::Fractional);
            const BitBudget ce = budget(n.secondary_size, n.radius_bits, bits_dh, BitMode::Ceiled);
            std::printf("config: %s, d_h: %u\n", config_name(n.secondary_size, n.radius_bits).c_str(), bits_dh);
            std::printf("index bits: %.2f fractional, %d ceiled\n", fr.index_bits_fractional, fr.index_bits_ceiled);
            std::printf("per-chunk bits: %.2f\n", fr.per_chunk_bits);
            std::printf("per-element bits: %.2f / %.2f\n", fr.per_element_bits, fr.per_element_with_scale);
            std::printf("ceiled per-element bits: %.2f / %.2f\n", ce.per_element_bits, ce.per_element_with_scale);
            std::printf("compression vs fp16: %.2fx (fractional), %.2fx (ceiled)\n", fr.compression_ratio,
                        ce.compression_ratio);
        } else if (*verify) {
            const GroupReport rep = verify_group(build_2t());
            std::printf("closure: %s, min angle: %g deg\n", rep.closure ? "ok" : "FAILED", rep.min_angle_deg);
            std::printf("identity: %s, inverses: %s\n", rep.identity_index ? "ok" : "FAILED",
                        rep.all_inverses ? "ok" : "FAILED");
            std::printf("angle spectrum (deg: ordered pairs):");
            for (const auto& [deg, n] : rep.angle_histogram) {
                std::printf(" %d:%zu", deg, n);
            }
            std::printf("\n");
            return rep.ok() ? 0 : kExitCheckFailed;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
