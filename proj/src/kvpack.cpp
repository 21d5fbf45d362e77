#include "hqmq/kvpack.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "hqmq/bit_budget.hpp"
#include "hqmq/errors.hpp"
#include "hqmq/half.hpp"

namespace hqmq {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'H', 'Q', 'M', 'Q'};
constexpr std::array<std::uint8_t, 4> kRawMagic{'K', 'V', 'R', 'W'};
constexpr std::size_t kRawHeaderBytes = 24;

enum SectionId : std::uint32_t {
    kScales = 1,
    kIndices = 2,
    kRadii = 3,
    kFlags = 4,
    kOutliers = 5,
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void patch_u64(std::size_t at, std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            buf_[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
        }
    }
    std::size_t size() const { return buf_.size(); }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) {
            throw CorruptData("truncated data");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

/// LSB-first bit packer.
class BitWriter {
public:
    void put(std::uint64_t value, int width) {
        for (int i = 0; i < width; ++i) {
            if (nbits_ % 8 == 0) {
                out_.push_back(0);
            }
            if ((value >> i) & 1U) {
                out_.back() |= static_cast<std::uint8_t>(1U << (nbits_ % 8));
            }
            ++nbits_;
        }
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
    std::size_t nbits_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> b) : b_(b) {}

    std::uint64_t get(int width) {
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            const std::size_t byte = nbits_ / 8;
            if (byte >= b_.size()) {
                throw CorruptData("bit stream truncated");
            }
            v |= std::uint64_t{(b_[byte] >> (nbits_ % 8)) & 1U} << i;
            ++nbits_;
        }
        return v;
    }

    /// The unread tail of the last byte must be zero and no bytes may remain.
    void finish() const {
        const std::size_t used = (nbits_ + 7) / 8;
        if (used != b_.size()) {
            throw CorruptData("bit stream has trailing bytes");
        }
        if (nbits_ % 8 != 0 && (b_.back() >> (nbits_ % 8)) != 0) {
            throw CorruptData("nonzero bit stream padding");
        }
    }

private:
    std::span<const std::uint8_t> b_;
    std::size_t nbits_ = 0;
};

std::size_t packed_bytes(std::size_t bits) {
    return (bits + 7) / 8;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> b) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded pieces.
    constexpr std::size_t kPiece = 1U << 30;
    for (std::size_t off = 0; off < b.size(); off += kPiece) {
        const std::size_t n = std::min(kPiece, b.size() - off);
        crc = crc32(crc, b.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

KvpackBits kvpack_payload_bits(const QuantizedTensor& qt) {
    const int index_bits = ceil_log2(qt.config.joint_size());
    KvpackBits b;
    b.scales = 16 * qt.scales.size();
    b.indices = static_cast<std::size_t>(index_bits) * qt.codes.size();
    b.radii = static_cast<std::size_t>(qt.config.radius_bits) * qt.codes.size();
    b.flags = qt.extraction_enabled() ? qt.shape.num_chunks() : 0;
    b.outliers = 64 * qt.outlier_payloads.size();
    return b;
}

std::vector<std::uint8_t> serialize_kvpack(const QuantizedTensor& qt) {
    validate(qt);
    const CodecConfig& cfg = qt.config;
    const int index_bits = ceil_log2(cfg.joint_size());

    ByteWriter w;
    w.bytes(kMagic);
    w.u16(kKvpackVersion);
    std::uint16_t flags = 0;
    if (qt.extraction_enabled()) {
        flags |= 1U;
    }
    if (cfg.pooling == MedianPooling::PerHead) {
        flags |= 2U;
    }
    w.u16(flags);
    w.u8(static_cast<std::uint8_t>(cfg.role));
    w.u8(static_cast<std::uint8_t>(cfg.radius_bits));
    w.u8(static_cast<std::uint8_t>(index_bits));
    w.u8(0);
    w.u32(qt.shape.batch);
    w.u32(qt.shape.heads);
    w.u32(qt.shape.tokens);
    w.u32(qt.shape.head_dim);
    w.u32(cfg.secondary_size);
    w.u32(cfg.layer);
    w.u32(cfg.head_offset);
    std::uint32_t fixed_c = 0;
    if (cfg.outlier_multiplier) {
        const double snapped = snap_multiplier(*cfg.outlier_multiplier);
        HQMQ_THROW_IF_NOT(snapped == *cfg.outlier_multiplier, InvalidArgument,
                          "outlier multiplier is not on the 16.16 grid");
        fixed_c = static_cast<std::uint32_t>(snapped * 65536.0);
    }
    w.u32(fixed_c);
    w.u64(cfg.seed);
    w.u32(static_cast<std::uint32_t>(kKvpackSectionCount));

    std::array<std::vector<std::uint8_t>, kKvpackSectionCount> sections;
    {
        ByteWriter s;
        for (std::uint16_t h : qt.scales) {
            s.u16(h);
        }
        sections[0] = s.take();
    }
    {
        BitWriter idx;
        BitWriter rad;
        for (const ChunkCode& c : qt.codes) {
            idx.put(c.index, index_bits);
            rad.put(c.radius.quantum, cfg.radius_bits);
        }
        sections[1] = std::move(idx.bytes());
        sections[2] = std::move(rad.bytes());
    }
    {
        BitWriter f;
        for (std::uint8_t flag : qt.outlier_flags) {
            f.put(flag, 1);
        }
        sections[3] = std::move(f.bytes());
    }
    {
        ByteWriter o;
        for (const HalfQuad& q : qt.outlier_payloads) {
            for (std::uint16_t h : q) {
                o.u16(h);
            }
        }
        sections[4] = o.take();
    }

    std::uint64_t offset = kKvpackHeaderBytes + kKvpackTableBytes;
    for (std::size_t i = 0; i < kKvpackSectionCount; ++i) {
        w.u32(static_cast<std::uint32_t>(i + 1));
        w.u32(0);
        w.u64(offset);
        w.u64(sections[i].size());
        offset += sections[i].size();
    }
    for (const auto& s : sections) {
        w.bytes(s);
    }
    auto out = w.take();
    const std::uint32_t crc = crc32_of(out);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    }
    return out;
}

QuantizedTensor parse_kvpack(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kKvpackFixedBytes) {
        throw CorruptData("kvpack file truncated");
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw CorruptData("bad kvpack magic");
    }
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4));
    if (tail.u32() != crc32_of(body)) {
        throw CorruptData("kvpack checksum mismatch");
    }

    ByteReader r(body);
    r.bytes(4);
    const std::uint16_t version = r.u16();
    if (version != kKvpackVersion) {
        throw UnsupportedVersion("unsupported kvpack version " + std::to_string(version));
    }
    const std::uint16_t flags = r.u16();
    HQMQ_THROW_IF_NOT((flags & ~3U) == 0, CorruptData, "unknown kvpack flags");

    QuantizedTensor qt;
    CodecConfig& cfg = qt.config;
    const std::uint8_t role = r.u8();
    HQMQ_THROW_IF_NOT(role <= 1, CorruptData, "bad role");
    cfg.role = static_cast<Role>(role);
    cfg.radius_bits = r.u8();
    const int index_bits = r.u8();
    HQMQ_THROW_IF_NOT(r.u8() == 0, CorruptData, "reserved header byte is nonzero");
    qt.shape.batch = r.u32();
    qt.shape.heads = r.u32();
    qt.shape.tokens = r.u32();
    qt.shape.head_dim = r.u32();
    cfg.secondary_size = r.u32();
    cfg.layer = r.u32();
    cfg.head_offset = r.u32();
    const std::uint32_t fixed_c = r.u32();
    cfg.seed = r.u64();
    cfg.pooling = (flags & 2U) ? MedianPooling::PerHead : MedianPooling::AcrossHeads;
    const bool extraction = (flags & 1U) != 0;
    if (extraction) {
        HQMQ_THROW_IF_NOT(fixed_c != 0, CorruptData, "extraction enabled with zero multiplier");
        cfg.outlier_multiplier = fixed_c / 65536.0;
    } else {
        HQMQ_THROW_IF_NOT(fixed_c == 0, CorruptData, "multiplier set with extraction disabled");
    }

    HQMQ_THROW_IF_NOT(cfg.secondary_size >= 1 && cfg.radius_bits >= kMinRadiusBits &&
                          cfg.radius_bits <= kMaxRadiusBits,
                      CorruptData, "bad codec parameters");
    HQMQ_THROW_IF_NOT(index_bits == ceil_log2(cfg.joint_size()), CorruptData, "index width mismatch");
    HQMQ_THROW_IF_NOT(qt.shape.batch >= 1 && qt.shape.heads >= 1 && qt.shape.head_dim >= 1,
                      CorruptData, "bad tensor shape");
    HQMQ_THROW_IF_NOT(r.u32() == kKvpackSectionCount, CorruptData, "bad section count");

    std::array<std::span<const std::uint8_t>, kKvpackSectionCount> sec;
    std::uint64_t expect_offset = kKvpackHeaderBytes + kKvpackTableBytes;
    for (std::size_t i = 0; i < kKvpackSectionCount; ++i) {
        HQMQ_THROW_IF_NOT(r.u32() == i + 1, CorruptData, "bad section id");
        HQMQ_THROW_IF_NOT(r.u32() == 0, CorruptData, "reserved section field is nonzero");
        const std::uint64_t off = r.u64();
        const std::uint64_t len = r.u64();
        HQMQ_THROW_IF_NOT(off == expect_offset && len <= body.size() && off <= body.size() - len,
                          CorruptData, "bad section table");
        sec[i] = body.subspan(off, len);
        expect_offset += len;
    }
    HQMQ_THROW_IF_NOT(expect_offset == body.size(), CorruptData, "kvpack has trailing bytes");

    const std::size_t rows = qt.shape.rows();
    const std::size_t chunks = qt.shape.num_chunks();
    HQMQ_THROW_IF_NOT(sec[0].size() == 2 * rows, CorruptData, "scale section size mismatch");
    ByteReader scales(sec[0]);
    qt.scales.resize(rows);
    for (auto& h : qt.scales) {
        h = scales.u16();
    }

    std::size_t flagged = 0;
    if (extraction) {
        HQMQ_THROW_IF_NOT(sec[3].size() == packed_bytes(chunks), CorruptData, "flag section size mismatch");
        BitReader f(sec[3]);
        qt.outlier_flags.resize(chunks);
        for (auto& flag : qt.outlier_flags) {
            flag = static_cast<std::uint8_t>(f.get(1));
            flagged += flag;
        }
        f.finish();
    } else {
        HQMQ_THROW_IF_NOT(sec[3].empty() && sec[4].empty(), CorruptData,
                          "outlier sections present with extraction disabled");
    }

    const std::size_t ncodes = chunks - flagged;
    HQMQ_THROW_IF_NOT(sec[1].size() == packed_bytes(ncodes * index_bits), CorruptData,
                      "index section size mismatch");
    HQMQ_THROW_IF_NOT(sec[2].size() == packed_bytes(ncodes * cfg.radius_bits), CorruptData,
                      "radius section size mismatch");
    BitReader idx(sec[1]);
    BitReader rad(sec[2]);
    qt.codes.resize(ncodes);
    for (auto& c : qt.codes) {
        c.index = static_cast<std::uint32_t>(idx.get(index_bits));
        c.radius.quantum = static_cast<std::uint32_t>(rad.get(cfg.radius_bits));
        c.radius.bits = static_cast<std::uint8_t>(cfg.radius_bits);
    }
    idx.finish();
    rad.finish();

    HQMQ_THROW_IF_NOT(sec[4].size() == 8 * flagged, CorruptData, "outlier section size mismatch");
    ByteReader o(sec[4]);
    qt.outlier_payloads.resize(flagged);
    for (auto& q : qt.outlier_payloads) {
        for (auto& h : q) {
            h = o.u16();
        }
    }

    validate(qt);
    return qt;
}

std::size_t write_kvpack(const QuantizedTensor& qt, std::ostream& sink) {
    const auto bytes = serialize_kvpack(qt);
    sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!sink) {
        throw Error("failed to write kvpack stream");
    }
    return bytes.size();
}

QuantizedTensor read_kvpack(std::istream& source) {
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
    return parse_kvpack(bytes);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot create " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed to write " + path.string());
    }
}

void save_kvpack(const QuantizedTensor& qt, const std::filesystem::path& path) {
    write_file(path, serialize_kvpack(qt));
}

QuantizedTensor load_kvpack(const std::filesystem::path& path) {
    return parse_kvpack(read_file(path));
}

std::vector<std::uint8_t> serialize_raw(const RawTensor& t) {
    HQMQ_THROW_IF_NOT(t.data.size() == t.shape.num_elements(), InvalidArgument,
                      "raw tensor data does not match its shape");
    ByteWriter w;
    w.bytes(kRawMagic);
    w.u8(static_cast<std::uint8_t>(t.dtype));
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u32(t.shape.batch);
    w.u32(t.shape.heads);
    w.u32(t.shape.tokens);
    w.u32(t.shape.head_dim);
    for (double v : t.data) {
        if (t.dtype == RawDType::F32) {
            w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            w.u16(half_from_double(v));
        }
    }
    return w.take();
}

RawTensor parse_raw(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kRawHeaderBytes || !std::equal(kRawMagic.begin(), kRawMagic.end(), bytes.begin())) {
        throw CorruptData("not a KVRW raw tensor");
    }
    ByteReader r(bytes);
    r.bytes(4);
    RawTensor t;
    const std::uint8_t dtype = r.u8();
    HQMQ_THROW_IF_NOT(dtype == 1 || dtype == 2, CorruptData, "unknown raw dtype");
    t.dtype = static_cast<RawDType>(dtype);
    HQMQ_THROW_IF_NOT(r.u8() == 0 && r.u8() == 0 && r.u8() == 0, CorruptData, "reserved bytes nonzero");
    t.shape.batch = r.u32();
    t.shape.heads = r.u32();
    t.shape.tokens = r.u32();
    t.shape.head_dim = r.u32();
    const std::size_t elem = t.dtype == RawDType::F32 ? 4 : 2;
    const std::size_t n = t.shape.num_elements();
    HQMQ_THROW_IF_NOT(bytes.size() - kRawHeaderBytes == n * elem, CorruptData,
                      "raw payload length does not match shape");
    t.data.resize(n);
    for (double& v : t.data) {
        v = t.dtype == RawDType::F32 ? static_cast<double>(std::bit_cast<float>(r.u32()))
                                     : half_to_double(r.u16());
    }
    return t;
}

void save_raw(const RawTensor& t, const std::filesystem::path& path) {
    write_file(path, serialize_raw(t));
}

RawTensor load_raw(const std::filesystem::path& path) {
    return parse_raw(read_file(path));
}

ManifestEntry manifest_entry(const QuantizedTensor& qt, std::string file) {
    ManifestEntry e;
    e.file = std::move(file);
    e.layer = qt.config.layer;
    e.head_offset = qt.config.head_offset;
    e.heads = qt.shape.heads;
    e.role = std::string(role_name(qt.config.role));
    e.secondary_size = qt.config.secondary_size;
    e.radius_bits = qt.config.radius_bits;
    e.seed = qt.config.seed;
    return e;
}

Manifest load_manifest(const std::filesystem::path& path) {
    Manifest m;
    if (!std::filesystem::exists(path)) {
        return m;
    }
    nlohmann::json j;
    try {
        std::ifstream in(path);
        in >> j;
        if (j.at("format") != "hqmq-manifest" || j.at("version") != 1) {
            throw CorruptData("not an hqmq manifest: " + path.string());
        }
        for (const auto& e : j.at("members")) {
            ManifestEntry me;
            me.file = e.at("file").get<std::string>();
            me.layer = e.at("layer").get<std::uint32_t>();
            me.head_offset = e.at("head_offset").get<std::uint32_t>();
            me.heads = e.at("heads").get<std::uint32_t>();
            me.role = e.at("role").get<std::string>();
            me.secondary_size = e.at("S").get<std::uint32_t>();
            me.radius_bits = e.at("b_r").get<int>();
            me.seed = e.at("seed").get<std::uint64_t>();
            m.members.push_back(std::move(me));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw CorruptData("malformed manifest " + path.string() + ": " + ex.what());
    }
    return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "hqmq-manifest";
    j["version"] = 1;
    j["members"] = nlohmann::json::array();
    for (const auto& e : m.members) {
        j["members"].push_back({{"file", e.file},
                                {"layer", e.layer},
                                {"head_offset", e.head_offset},
                                {"heads", e.heads},
                                {"role", e.role},
                                {"S", e.secondary_size},
                                {"b_r", e.radius_bits},
                                {"seed", e.seed}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot create " + path.string());
    }
    out << j.dump(2) << '\n';
}

} // namespace hqmq
