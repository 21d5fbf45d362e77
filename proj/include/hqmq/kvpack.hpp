#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hqmq/codec.hpp"

namespace hqmq {

// kvpack, format version 1. All integers little-endian.
//
//   off  size  field
//     0     4  magic "HQMQ"
//     4     2  version (1)
//     6     2  flags: bit0 outlier extraction, bit1 per-head median pooling
//     8     1  role (0 = K, 1 = V)
//     9     1  radius bits b_r
//    10     1  index bits = ceil(log2(24 S))
//    11     1  reserved, 0
//    12  4x4   batch, heads, tokens, head_dim
//    28     4  S
//    32     4  layer
//    36     4  head offset
//    40     4  outlier multiplier, unsigned 16.16 fixed point (0 if disabled)
//    44     8  seed
//    52     4  section count (5)
//    56  5x24  section table: u32 id, u32 reserved, u64 offset, u64 byte length
//   176        sections, in id order, contiguous:
//                1 scales    binary16 per row (b, h, t)
//                2 indices   index_bits per unflagged chunk, LSB-first bit stream
//                3 radii     b_r bits per unflagged chunk, LSB-first bit stream
//                4 flags     1 bit per chunk (empty if extraction is disabled)
//                5 outliers  4 x binary16 per flagged chunk
//   end-4   4  CRC-32 (IEEE 802.3) of every preceding byte
//
// Bit streams are padded with zero bits to a whole byte; the reader rejects
// nonzero padding so that read -> write reproduces the input exactly.

inline constexpr std::uint16_t kKvpackVersion = 1;
inline constexpr std::size_t kKvpackHeaderBytes = 56;
inline constexpr std::size_t kKvpackSectionCount = 5;
inline constexpr std::size_t kKvpackTableBytes = kKvpackSectionCount * 24;
/// Header, section table and checksum.
inline constexpr std::size_t kKvpackFixedBytes = kKvpackHeaderBytes + kKvpackTableBytes + 4;

std::vector<std::uint8_t> serialize_kvpack(const QuantizedTensor& qt);

/// Throws CorruptData (bad magic, checksum, truncation, inconsistent
/// sections, nonzero padding) or UnsupportedVersion.
QuantizedTensor parse_kvpack(std::span<const std::uint8_t> bytes);

/// Returns the number of bytes written.
std::size_t write_kvpack(const QuantizedTensor& qt, std::ostream& sink);
QuantizedTensor read_kvpack(std::istream& source);

void save_kvpack(const QuantizedTensor& qt, const std::filesystem::path& path);
QuantizedTensor load_kvpack(const std::filesystem::path& path);

/// Payload bits (sections 1-5, before byte padding) of a tensor.
struct KvpackBits {
    std::size_t scales = 0;
    std::size_t indices = 0;
    std::size_t radii = 0;
    std::size_t flags = 0;
    std::size_t outliers = 0;

    std::size_t total() const { return scales + indices + radii + flags + outliers; }
};
KvpackBits kvpack_payload_bits(const QuantizedTensor& qt);

// Raw dense tensor ("KVRW"), little-endian:
//   0  4  magic "KVRW"
//   4  1  dtype (1 = f32, 2 = f16)
//   5  3  reserved, 0
//   8 16  batch, heads, tokens, head_dim (u32)
//  24     row-major payload
enum class RawDType : std::uint8_t { F32 = 1, F16 = 2 };

struct RawTensor {
    TensorShape shape;
    RawDType dtype = RawDType::F32;
    std::vector<double> data;
};

std::vector<std::uint8_t> serialize_raw(const RawTensor& t);
RawTensor parse_raw(std::span<const std::uint8_t> bytes);
void save_raw(const RawTensor& t, const std::filesystem::path& path);
RawTensor load_raw(const std::filesystem::path& path);

/// JSON list of per-(layer, head, role) kvpack files.
struct ManifestEntry {
    std::string file;
    std::uint32_t layer = 0;
    std::uint32_t head_offset = 0;
    std::uint32_t heads = 0;
    std::string role;
    std::uint32_t secondary_size = 0;
    int radius_bits = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    std::vector<ManifestEntry> members;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);
ManifestEntry manifest_entry(const QuantizedTensor& qt, std::string file);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace hqmq
