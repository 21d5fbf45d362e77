#include "hqmq/codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hqmq/errors.hpp"
#include "hqmq/half.hpp"

namespace hqmq {

namespace {

constexpr double kFixedPointOne = 65536.0;
constexpr std::uint16_t kHalfOne = 0x3C00;

void check_config(const CodecConfig& cfg) {
    HQMQ_THROW_IF_NOT(cfg.secondary_size >= 1, InvalidArgument, "S must be >= 1");
    HQMQ_THROW_IF_NOT(cfg.radius_bits >= kMinRadiusBits && cfg.radius_bits <= kMaxRadiusBits,
                      InvalidArgument, "radius bits must be in [1, 8]");
    if (cfg.outlier_multiplier) {
        HQMQ_THROW_IF_NOT(*cfg.outlier_multiplier > 0.0, InvalidArgument,
                          "outlier multiplier must be > 0");
    }
}

void check_shape(std::span<const double> data, const TensorShape& shape) {
    HQMQ_THROW_IF_NOT(shape.batch >= 1 && shape.heads >= 1 && shape.head_dim >= 1, InvalidArgument,
                      "tensor shape dimensions must be positive");
    HQMQ_THROW_IF_NOT(data.size() == shape.num_elements(), InvalidArgument,
                      "data length " + std::to_string(data.size()) + " does not match shape (" +
                          std::to_string(shape.num_elements()) + " elements)");
}

// The binary16 scale actually used by encoder and decoder.
std::uint16_t scale_bits(double sigma) {
    const std::uint16_t h = half_from_double(sigma);
    const double back = half_to_double(h);
    if (std::isinf(back)) {
        throw InvalidArgument("token scale exceeds the binary16 range");
    }
    return back > 0.0 ? h : kHalfOne;
}

} // namespace

double snap_multiplier(double c) {
    HQMQ_THROW_IF_NOT(c > 0.0 && c * kFixedPointOne < 4294967295.0, InvalidArgument,
                      "outlier multiplier out of range");
    const double fixed = std::max(1.0, std::round(c * kFixedPointOne));
    return fixed / kFixedPointOne;
}

CodebookSet::CodebookSet(const CodecConfig& cfg, std::uint32_t heads)
    : seed_(cfg.seed),
      layer_(cfg.layer),
      head_offset_(cfg.head_offset),
      role_(cfg.role),
      secondary_size_(cfg.secondary_size) {
    const PrimaryCodebook primary = build_2t();
    books_.reserve(heads);
    for (std::uint32_t h = 0; h < heads; ++h) {
        books_.emplace_back(primary, build_secondary(cfg.seed, cfg.layer, cfg.head_offset + h,
                                                     cfg.role, cfg.secondary_size));
    }
}

bool CodebookSet::matches(const CodecConfig& cfg, std::uint32_t heads) const {
    return seed_ == cfg.seed && layer_ == cfg.layer && head_offset_ == cfg.head_offset &&
           role_ == cfg.role && secondary_size_ == cfg.secondary_size && books_.size() == heads;
}

double QuantizedTensor::outlier_fraction() const {
    const std::size_t n = shape.num_chunks();
    return n == 0 ? 0.0 : static_cast<double>(outlier_payloads.size()) / static_cast<double>(n);
}

double QuantizedTensor::sigma(std::size_t row) const {
    return half_to_double(scales[row]);
}

std::vector<Quaternion> chunk(std::span<const double> vec) {
    std::vector<Quaternion> out((vec.size() + 3) / 4);
    for (std::size_t c = 0; c < out.size(); ++c) {
        std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < 4 && 4 * c + k < vec.size(); ++k) {
            v[k] = vec[4 * c + k];
        }
        out[c] = Quaternion::from_span(v);
    }
    return out;
}

ChunkCode encode_chunk(const Quaternion& x, const JointCodebook& jc, double sigma, int radius_bits) {
    const double r = norm(x);
    if (r == 0.0) {
        return {0, quantize_radius(0.0, sigma, radius_bits)};
    }
    const NearestResult nn = jc.nearest(x * (1.0 / r));
    return {static_cast<std::uint32_t>(nn.flat), quantize_radius(r, sigma, radius_bits)};
}

Quaternion decode_chunk(const ChunkCode& code, const JointCodebook& jc, double sigma) {
    if (code.index >= jc.size()) {
        throw CorruptData("codeword index " + std::to_string(code.index) + " out of range (" +
                          std::to_string(jc.size()) + ")");
    }
    if (code.radius.quantum == 0) {
        return {};
    }
    return jc[code.index] * dequantize_radius(code.radius, sigma);
}

QuantizedTensor encode_tensor(std::span<const double> data, const TensorShape& shape,
                              const CodecConfig& cfg) {
    check_config(cfg);
    return encode_tensor(data, shape, cfg, CodebookSet(cfg, shape.heads));
}

QuantizedTensor encode_tensor(std::span<const double> data, const TensorShape& shape,
                              const CodecConfig& cfg_in, const CodebookSet& books) {
    check_config(cfg_in);
    check_shape(data, shape);
    if (!books.matches(cfg_in, shape.heads)) {
        throw ConfigMismatch("codebook set was built for a different configuration");
    }

    QuantizedTensor qt;
    qt.shape = shape;
    qt.config = cfg_in;
    if (qt.config.outlier_multiplier) {
        qt.config.outlier_multiplier = snap_multiplier(*qt.config.outlier_multiplier);
    }

    const std::size_t nc = shape.chunks_per_vector();
    const std::size_t d = shape.head_dim;
    std::vector<Quaternion> chunks;
    chunks.reserve(shape.num_chunks());
    for (std::size_t row = 0; row < shape.rows(); ++row) {
        const auto v = chunk(data.subspan(row * d, d));
        chunks.insert(chunks.end(), v.begin(), v.end());
    }

    std::vector<std::uint8_t> flags(chunks.size(), 0);
    if (qt.config.outlier_multiplier && !chunks.empty()) {
        const OutlierPolicy policy{*qt.config.outlier_multiplier};
        if (qt.config.pooling == MedianPooling::AcrossHeads) {
            flags = extract(chunks, policy).flags;
        } else {
            const std::size_t per_row = nc;
            for (std::size_t h = 0; h < shape.heads; ++h) {
                std::vector<std::size_t> members;
                for (std::size_t b = 0; b < shape.batch; ++b) {
                    for (std::size_t t = 0; t < shape.tokens; ++t) {
                        const std::size_t base = shape.row_index(b, h, t) * per_row;
                        for (std::size_t c = 0; c < nc; ++c) {
                            members.push_back(base + c);
                        }
                    }
                }
                std::vector<Quaternion> sub;
                sub.reserve(members.size());
                for (std::size_t i : members) {
                    sub.push_back(chunks[i]);
                }
                const auto res = extract(sub, policy);
                for (std::size_t k = 0; k < members.size(); ++k) {
                    flags[members[k]] = res.flags[k];
                }
            }
        }
        qt.outlier_flags = flags;
    }

    qt.scales.resize(shape.rows());
    qt.codes.reserve(chunks.size());
    std::vector<double> norms;
    for (std::size_t b = 0; b < shape.batch; ++b) {
        for (std::size_t h = 0; h < shape.heads; ++h) {
            const JointCodebook& jc = books[h];
            for (std::size_t t = 0; t < shape.tokens; ++t) {
                const std::size_t row = shape.row_index(b, h, t);
                const std::size_t base = row * nc;
                norms.clear();
                for (std::size_t c = 0; c < nc; ++c) {
                    if (!flags[base + c]) {
                        norms.push_back(norm(chunks[base + c]));
                    }
                }
                const double sigma_raw = norms.empty() ? 1.0 : token_scale(norms).sigma;
                qt.scales[row] = scale_bits(sigma_raw);
                const double sigma = half_to_double(qt.scales[row]);
                for (std::size_t c = 0; c < nc; ++c) {
                    if (flags[base + c]) {
                        qt.outlier_payloads.push_back(to_half_quad(chunks[base + c]));
                    } else {
                        qt.codes.push_back(encode_chunk(chunks[base + c], jc, sigma, cfg_in.radius_bits));
                    }
                }
            }
        }
    }
    return qt;
}

std::vector<double> decode_tensor(const QuantizedTensor& qt) {
    check_config(qt.config);
    return decode_tensor(qt, CodebookSet(qt.config, qt.shape.heads));
}

std::vector<double> decode_tensor(const QuantizedTensor& qt, const CodebookSet& books) {
    validate(qt);
    if (!books.matches(qt.config, qt.shape.heads)) {
        throw ConfigMismatch("codebook set was built for a different configuration");
    }
    const TensorShape& shape = qt.shape;
    const std::size_t nc = shape.chunks_per_vector();
    const std::size_t d = shape.head_dim;
    std::vector<double> out(shape.num_elements(), 0.0);
    std::vector<double> padded(nc * 4);

    std::size_t code_i = 0;
    std::size_t payload_i = 0;
    for (std::size_t b = 0; b < shape.batch; ++b) {
        for (std::size_t h = 0; h < shape.heads; ++h) {
            for (std::size_t t = 0; t < shape.tokens; ++t) {
                const std::size_t row = shape.row_index(b, h, t);
                const double sigma = qt.sigma(row);
                for (std::size_t c = 0; c < nc; ++c) {
                    const bool flagged = qt.extraction_enabled() && qt.outlier_flags[row * nc + c];
                    const Quaternion q = flagged
                                             ? from_half_quad(qt.outlier_payloads[payload_i++])
                                             : decode_chunk(qt.codes[code_i++], books[h], sigma);
                    const auto a = q.to_array();
                    std::copy(a.begin(), a.end(), padded.begin() + static_cast<std::ptrdiff_t>(4 * c));
                }
                std::copy_n(padded.begin(), d, out.begin() + static_cast<std::ptrdiff_t>(row * d));
            }
        }
    }
    return out;
}

std::vector<double> fake_quantize(std::span<const double> data, const TensorShape& shape,
                                  const CodecConfig& cfg) {
    check_config(cfg);
    const CodebookSet books(cfg, shape.heads);
    return decode_tensor(encode_tensor(data, shape, cfg, books), books);
}

RowLocator::RowLocator(const QuantizedTensor& qt) {
    const std::size_t rows = qt.shape.rows();
    const std::size_t nc = qt.shape.chunks_per_vector();
    code_start_.resize(rows);
    payload_start_.resize(rows);
    std::size_t codes = 0;
    std::size_t payloads = 0;
    // Rows are laid out in (b, h, t) order, which is also row-index order.
    for (std::size_t row = 0; row < rows; ++row) {
        code_start_[row] = codes;
        payload_start_[row] = payloads;
        std::size_t flagged = 0;
        if (qt.extraction_enabled()) {
            for (std::size_t c = 0; c < nc; ++c) {
                flagged += qt.outlier_flags[row * nc + c];
            }
        }
        payloads += flagged;
        codes += nc - flagged;
    }
}

void decode_row(const QuantizedTensor& qt, const RowLocator& loc, const JointCodebook& jc,
                std::size_t row, std::span<double> out) {
    const std::size_t nc = qt.shape.chunks_per_vector();
    const std::size_t d = qt.shape.head_dim;
    HQMQ_THROW_IF_NOT(out.size() == d, InvalidArgument, "decode_row output has wrong length");
    std::size_t code_i = loc.code_start(row);
    std::size_t payload_i = loc.payload_start(row);
    const double sigma = qt.sigma(row);
    for (std::size_t c = 0; c < nc; ++c) {
        const bool flagged = qt.extraction_enabled() && qt.outlier_flags[row * nc + c];
        const Quaternion q = flagged ? from_half_quad(qt.outlier_payloads[payload_i++])
                                     : decode_chunk(qt.codes[code_i++], jc, sigma);
        for (std::size_t k = 0; k < 4 && 4 * c + k < d; ++k) {
            out[4 * c + k] = q[static_cast<int>(k)];
        }
    }
}

void validate(const QuantizedTensor& qt) {
    const TensorShape& s = qt.shape;
    HQMQ_THROW_IF_NOT(s.batch >= 1 && s.heads >= 1 && s.head_dim >= 1, CorruptData,
                      "invalid tensor shape");
    HQMQ_THROW_IF_NOT(qt.scales.size() == s.rows(), CorruptData, "scale count does not match shape");
    std::size_t flagged = 0;
    if (qt.extraction_enabled()) {
        HQMQ_THROW_IF_NOT(qt.outlier_flags.size() == s.num_chunks(), CorruptData,
                          "flag count does not match shape");
        for (std::uint8_t f : qt.outlier_flags) {
            HQMQ_THROW_IF_NOT(f <= 1, CorruptData, "outlier flag is not 0/1");
            flagged += f;
        }
    } else {
        HQMQ_THROW_IF_NOT(qt.outlier_flags.empty() && qt.outlier_payloads.empty(), CorruptData,
                          "outlier data present with extraction disabled");
    }
    HQMQ_THROW_IF_NOT(qt.outlier_payloads.size() == flagged, CorruptData,
                      "outlier payload count does not match flags");
    HQMQ_THROW_IF_NOT(qt.codes.size() + flagged == s.num_chunks(), CorruptData,
                      "code count does not match shape");
    const std::size_t joint = qt.config.joint_size();
    for (const ChunkCode& c : qt.codes) {
        HQMQ_THROW_IF_NOT(c.index < joint, CorruptData, "codeword index out of range");
        HQMQ_THROW_IF_NOT(c.radius.bits == qt.config.radius_bits, CorruptData,
                          "radius code width mismatch");
        HQMQ_THROW_IF_NOT(c.radius.quantum < (1U << c.radius.bits), CorruptData,
                          "radius quantum out of range");
    }
}

} // namespace hqmq
