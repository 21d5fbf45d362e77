#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hqmq/joint_codebook.hpp"
#include "hqmq/outlier.hpp"
#include "hqmq/quat.hpp"
#include "hqmq/scalar_quant.hpp"

namespace hqmq {

/// (batch, heads, tokens, head_dim), row-major with head_dim fastest.
struct TensorShape {
    std::uint32_t batch = 1;
    std::uint32_t heads = 1;
    std::uint32_t tokens = 0;
    std::uint32_t head_dim = 4;

    friend bool operator==(const TensorShape&, const TensorShape&) = default;

    std::size_t chunks_per_vector() const { return (head_dim + 3) / 4; }
    std::size_t rows() const { return std::size_t{batch} * heads * tokens; }
    std::size_t num_chunks() const { return rows() * chunks_per_vector(); }
    std::size_t num_elements() const { return rows() * head_dim; }
    std::size_t row_index(std::size_t b, std::size_t h, std::size_t t) const {
        return (b * heads + h) * tokens + t;
    }
};

struct CodecConfig {
    std::uint32_t secondary_size = 96;
    int radius_bits = 4;
    std::uint64_t seed = 0;
    std::uint32_t layer = 0;
    /// Global index of local head 0; local head h uses codebook stream head_offset + h.
    std::uint32_t head_offset = 0;
    Role role = Role::K;
    /// Outlier multiplier C; disabled when empty. Snapped to a multiple of
    /// 2^-16 on encode so it survives serialization unchanged.
    std::optional<double> outlier_multiplier;
    MedianPooling pooling = MedianPooling::AcrossHeads;

    friend bool operator==(const CodecConfig&, const CodecConfig&) = default;

    std::size_t joint_size() const { return 24 * std::size_t{secondary_size}; }
};

/// Snap an outlier multiplier to the 16.16 fixed-point grid used on disk.
double snap_multiplier(double c);

struct ChunkCode {
    std::uint32_t index = 0; ///< flat joint index p * S + s
    RadiusCode radius;

    friend bool operator==(const ChunkCode&, const ChunkCode&) = default;
};

/// One JointCodebook per local head, for a given (seed, layer, role, S).
class CodebookSet {
public:
    explicit CodebookSet(const CodecConfig& cfg, std::uint32_t heads);

    const JointCodebook& operator[](std::size_t head) const { return books_[head]; }
    std::size_t size() const { return books_.size(); }

    /// True if the set was built for the codebook-relevant fields of `cfg`.
    bool matches(const CodecConfig& cfg, std::uint32_t heads) const;

private:
    std::uint64_t seed_;
    std::uint32_t layer_;
    std::uint32_t head_offset_;
    Role role_;
    std::uint32_t secondary_size_;
    std::vector<JointCodebook> books_;
};

/// Packed HQMQ representation of a (B, H, T, d_h) tensor.
///
/// Chunks are ordered (b, h, t, c). Unflagged chunks each own one entry of
/// `codes`, flagged chunks one entry of `outlier_payloads`, both in chunk
/// order. `outlier_flags` is empty when extraction is disabled.
struct QuantizedTensor {
    TensorShape shape;
    CodecConfig config;
    std::vector<std::uint16_t> scales; ///< binary16 sigma per row (b, h, t)
    std::vector<ChunkCode> codes;
    std::vector<std::uint8_t> outlier_flags;
    std::vector<HalfQuad> outlier_payloads;

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;

    bool extraction_enabled() const { return config.outlier_multiplier.has_value(); }
    double outlier_fraction() const;
    double sigma(std::size_t row) const;
};

/// Split one head vector into 4-element chunks, zero-padding the last one.
std::vector<Quaternion> chunk(std::span<const double> vec);

/// Encode a chunk against one joint codebook. A zero chunk encodes as
/// (index 0, quantum 0).
ChunkCode encode_chunk(const Quaternion& x, const JointCodebook& jc, double sigma, int radius_bits);

/// r̂ · codeword; quantum 0 decodes to the exact zero chunk. Throws
/// CorruptData on an out-of-range index.
Quaternion decode_chunk(const ChunkCode& code, const JointCodebook& jc, double sigma);

QuantizedTensor encode_tensor(std::span<const double> data, const TensorShape& shape,
                              const CodecConfig& cfg);
QuantizedTensor encode_tensor(std::span<const double> data, const TensorShape& shape,
                              const CodecConfig& cfg, const CodebookSet& books);

std::vector<double> decode_tensor(const QuantizedTensor& qt);
std::vector<double> decode_tensor(const QuantizedTensor& qt, const CodebookSet& books);

/// decode_tensor(encode_tensor(...)).
std::vector<double> fake_quantize(std::span<const double> data, const TensorShape& shape,
                                  const CodecConfig& cfg);

/// Random access into a QuantizedTensor: for each row, where its codes and
/// payloads start.
class RowLocator {
public:
    explicit RowLocator(const QuantizedTensor& qt);

    std::size_t code_start(std::size_t row) const { return code_start_[row]; }
    std::size_t payload_start(std::size_t row) const { return payload_start_[row]; }

private:
    std::vector<std::size_t> code_start_;
    std::vector<std::size_t> payload_start_;
};

/// Decode the head vector of one row into `out` (head_dim values).
void decode_row(const QuantizedTensor& qt, const RowLocator& loc, const JointCodebook& jc,
                std::size_t row, std::span<double> out);

/// Throws CorruptData unless the code/payload/flag/scale counts agree with
/// the shape and every index is below 24S.
void validate(const QuantizedTensor& qt);

} // namespace hqmq
