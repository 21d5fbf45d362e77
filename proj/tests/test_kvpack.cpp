#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hqmq/bit_budget.hpp"
#include "hqmq/errors.hpp"
#include "hqmq/kvpack.hpp"
#include "hqmq/synth.hpp"
#include "oracles.hpp"

using namespace hqmq;
namespace fs = std::filesystem;

namespace {

QuantizedTensor sample(bool extraction, std::uint32_t tokens = 24, std::uint32_t dh = 12) {
    const TensorShape shape{2, 2, tokens, dh};
    CodecConfig cfg;
    cfg.secondary_size = 48;
    cfg.radius_bits = 5;
    cfg.seed = 21;
    cfg.layer = 7;
    cfg.head_offset = 4;
    cfg.role = Role::V;
    if (extraction) {
        cfg.outlier_multiplier = 2.5;
        cfg.pooling = MedianPooling::PerHead;
    }
    return encode_tensor(gen_chunks(SynthProfile::outlier_heavy(), shape, 3), shape, cfg);
}

void put_crc(std::vector<std::uint8_t>& b) {
    const std::uint32_t crc = oracle::crc32(b, b.size() - 4);
    for (int i = 0; i < 4; ++i) {
        b[b.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
    }
}

fs::path temp_dir() {
    const fs::path d = fs::temp_directory_path() / "hqmq_test_kvpack";
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("round trip") {
    for (bool ex : {false, true}) {
        const QuantizedTensor qt = sample(ex);
        const auto bytes = serialize_kvpack(qt);
        CHECK(std::memcmp(bytes.data(), "HQMQ", 4) == 0);
        const QuantizedTensor back = parse_kvpack(bytes);
        CHECK(back == qt);
        CHECK(serialize_kvpack(back) == bytes);
        CHECK(decode_tensor(back) == decode_tensor(qt));
        // Trailer is the CRC of everything before it.
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i) {
            stored |= std::uint32_t{bytes[bytes.size() - 4 + i]} << (8 * i);
        }
        CHECK(stored == oracle::crc32(bytes, bytes.size() - 4));
    }
}

TEST_CASE("stream and file helpers") {
    const QuantizedTensor qt = sample(true);
    std::stringstream ss;
    const std::size_t n = write_kvpack(qt, ss);
    CHECK(n == serialize_kvpack(qt).size());
    CHECK(read_kvpack(ss) == qt);

    const fs::path p = temp_dir() / "a.kvpack";
    save_kvpack(qt, p);
    CHECK(fs::file_size(p) == n);
    CHECK(load_kvpack(p) == qt);
    CHECK_THROWS(load_kvpack(temp_dir() / "missing.kvpack"));
}

TEST_CASE("empty tensor") {
    const TensorShape shape{1, 3, 0, 8};
    const QuantizedTensor qt = encode_tensor(std::vector<double>{}, shape, {});
    const auto bytes = serialize_kvpack(qt);
    CHECK(bytes.size() == kKvpackFixedBytes);
    const QuantizedTensor back = parse_kvpack(bytes);
    CHECK(back == qt);
    CHECK(back.shape.tokens == 0);
    CHECK(decode_tensor(back).empty());
}

TEST_CASE("every single-byte corruption is detected") {
    const auto bytes = serialize_kvpack(sample(true, 6, 8));
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        auto b = bytes;
        b[i] ^= 0x01;
        CHECK_THROWS_AS(parse_kvpack(b), CorruptData);
    }
}

TEST_CASE("truncation and trailing garbage") {
    const auto bytes = serialize_kvpack(sample(false));
    for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{55}, std::size_t{176}, bytes.size() - 1}) {
        CHECK_THROWS_AS(parse_kvpack(std::span(bytes.data(), n)), CorruptData);
    }
    auto longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(parse_kvpack(longer), CorruptData);
}

TEST_CASE("structural errors behind a valid checksum") {
    const auto bytes = serialize_kvpack(sample(false));

    auto v = bytes;
    v[4] = 2;
    put_crc(v);
    CHECK_THROWS_AS(parse_kvpack(v), UnsupportedVersion);

    auto magic = bytes;
    magic[0] = 'X';
    put_crc(magic);
    CHECK_THROWS_AS(parse_kvpack(magic), CorruptData);

    auto reserved = bytes;
    reserved[11] = 1;
    put_crc(reserved);
    CHECK_THROWS_AS(parse_kvpack(reserved), CorruptData);

    auto sections = bytes;
    sections[52] = 4;
    put_crc(sections);
    CHECK_THROWS_AS(parse_kvpack(sections), CorruptData);

    // Index bits field disagreeing with S.
    auto ib = bytes;
    ib[10] = 9;
    put_crc(ib);
    CHECK_THROWS_AS(parse_kvpack(ib), CorruptData);
}

TEST_CASE("out-of-range index is rejected") {
    // S = 24: joint size 576 in 10-bit indices, so 1023 is representable.
    const TensorShape shape{1, 1, 1, 4};
    CodecConfig cfg;
    cfg.secondary_size = 24;
    QuantizedTensor qt = encode_tensor(std::vector<double>{1, 2, 3, 4}, shape, cfg);
    auto bytes = serialize_kvpack(qt);
    const std::size_t idx_off = 176 + 2; // one binary16 scale, then the index stream
    bytes[idx_off] = 0xFF;
    bytes[idx_off + 1] = 0x03;
    put_crc(bytes);
    CHECK_THROWS_AS(parse_kvpack(bytes), CorruptData);
}

TEST_CASE("payload size follows the bit budget") {
    for (bool ex : {false, true}) {
        const QuantizedTensor qt = sample(ex, 64, 128);
        const KvpackBits bits = kvpack_payload_bits(qt);
        const double elems = static_cast<double>(qt.shape.num_elements());
        const BitBudget b = budget(48, 5, 128, BitMode::Ceiled);
        const double p = qt.outlier_fraction();
        const double per_chunk_code = b.per_chunk_bits;
        const double predicted = ex ? ((1 - p) * per_chunk_code + 64 * p + 1) / 4 + 16.0 / 128
                                    : b.per_element_with_scale;
        CHECK(bits.total() / elems == doctest::Approx(predicted).epsilon(1e-12));
        CHECK(std::abs(bits.total() / elems - effective_bits(b.per_element_bits, p) - 16.0 / 128) < 1.0);
        CHECK(serialize_kvpack(qt).size() * 8 - bits.total() < 8 * 5 + 8 * kKvpackFixedBytes);
    }
}

TEST_CASE("raw tensors") {
    RawTensor t{{1, 2, 3, 5}, RawDType::F32, {}};
    for (std::size_t i = 0; i < 30; ++i) {
        t.data.push_back(static_cast<float>(i * 0.37 - 4));
    }
    const auto bytes = serialize_raw(t);
    CHECK(bytes.size() == 24 + 30 * 4);
    const RawTensor back = parse_raw(bytes);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);

    RawTensor h = t;
    h.dtype = RawDType::F16;
    const RawTensor hb = parse_raw(serialize_raw(h));
    CHECK(serialize_raw(h).size() == 24 + 30 * 2);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK(std::abs(hb.data[i] - t.data[i]) <= std::abs(t.data[i]) / 1024);
    }

    auto bad = bytes;
    bad[4] = 3;
    CHECK_THROWS_AS(parse_raw(bad), CorruptData);
    CHECK_THROWS_AS(parse_raw(std::span(bytes.data(), bytes.size() - 1)), CorruptData);

    const fs::path p = temp_dir() / "t.kvrw";
    save_raw(t, p);
    CHECK(load_raw(p).data == t.data);
}

TEST_CASE("manifest") {
    const fs::path p = temp_dir() / "manifest.json";
    fs::remove(p);
    CHECK(load_manifest(p).members.empty());
    const QuantizedTensor qt = sample(false);
    Manifest m;
    m.members.push_back(manifest_entry(qt, "l7_h4_V.kvpack"));
    save_manifest(m, p);
    const Manifest back = load_manifest(p);
    REQUIRE(back.members.size() == 1);
    CHECK(back.members[0] == m.members[0]);
    CHECK(back.members[0].layer == 7);
    CHECK(back.members[0].head_offset == 4);
    CHECK(back.members[0].heads == 2);
    CHECK(back.members[0].role == "V");
    CHECK(back.members[0].secondary_size == 48);
}

TEST_CASE("golden fixtures") {
    const fs::path dir = HQMQ_FIXTURE_DIR;
    std::ifstream in(dir / "golden.json");
    REQUIRE(in);
    const auto golden = nlohmann::json::parse(in);
    for (const auto& f : golden["fixtures"]) {
        CAPTURE(f["raw"].get<std::string>());
        const RawTensor raw = load_raw(dir / f["raw"].get<std::string>());
        const ConfigName cn = parse_config_name(f["config"].get<std::string>());
        CodecConfig cfg;
        cfg.secondary_size = cn.secondary_size;
        cfg.radius_bits = cn.radius_bits;
        cfg.seed = f["seed"].get<std::uint64_t>();
        if (f.contains("outlier_c")) {
            cfg.outlier_multiplier = f["outlier_c"].get<double>();
        }
        const auto bytes = serialize_kvpack(encode_tensor(raw.data, raw.shape, cfg));
        CHECK(bytes.size() == f["kvpack_bytes"].get<std::size_t>());
        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", oracle::crc32(bytes, bytes.size() - 4));
        CHECK(std::string(crc) == f["kvpack_crc32"].get<std::string>());
    }
}
