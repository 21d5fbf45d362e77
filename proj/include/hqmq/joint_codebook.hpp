#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hqmq/hurwitz.hpp"
#include "hqmq/quat.hpp"

namespace hqmq {

enum class Role : std::uint8_t { K = 0, V = 1 };

std::string_view role_name(Role r);
Role parse_role(std::string_view s);

/// S unit quaternions drawn from the stream keyed by (seed, layer, head, role).
///
/// Stream key: derive_seed(seed, {layer, head, role tag}) with role tag 0 for
/// K and 1 for V, fed to Xoshiro256. Entry i is the i-th haar_sample of that
/// stream, so the first S entries of a larger codebook equal the S-entry
/// codebook for the same key.
struct SecondaryCodebook {
    std::vector<Quaternion> entries;
    std::uint64_t seed = 0;
    std::uint32_t layer = 0;
    std::uint32_t head = 0;
    Role role = Role::K;

    std::size_t size() const { return entries.size(); }
};

SecondaryCodebook build_secondary(std::uint64_t seed, std::uint32_t layer, std::uint32_t head,
                                  Role role, std::size_t S);

/// Secondary codebook with caller-chosen entries (controls and tests).
SecondaryCodebook make_secondary(std::vector<Quaternion> entries);

struct NearestResult {
    std::size_t flat = 0; ///< p * S + s
    std::size_t primary = 0;
    std::size_t secondary = 0;
    double cosine = -1.0;
};

/// The multiplicative product set {q_p · q_s}, materialized once.
/// Codeword p * S + s is hamilton(primary[p], secondary[s]).
class JointCodebook {
public:
    JointCodebook(PrimaryCodebook primary, SecondaryCodebook secondary);

    std::size_t size() const { return codewords_.size(); }
    std::size_t secondary_size() const { return secondary_.size(); }
    const std::vector<Quaternion>& codewords() const { return codewords_; }
    const Quaternion& operator[](std::size_t flat) const { return codewords_[flat]; }
    const PrimaryCodebook& primary() const { return primary_; }
    const SecondaryCodebook& secondary() const { return secondary_; }

    std::size_t flat_index(std::size_t p, std::size_t s) const { return p * secondary_.size() + s; }

    /// Exhaustive argmax of <u, c> over all 24S codewords; ties go to the
    /// lowest flat index. Throws InvalidArgument if |u| is not 1 within 1e-6.
    NearestResult nearest(const Quaternion& u) const;

    /// Same result as nearest(), computed per coset: for each q_s the best
    /// primary element for w = u · conj(q_s) is read off the signs and
    /// magnitudes of w, so the scan is O(S) instead of O(24S).
    NearestResult nearest_by_coset(const Quaternion& u) const;

private:
    PrimaryCodebook primary_;
    SecondaryCodebook secondary_;
    std::vector<Quaternion> codewords_;
};

JointCodebook build_joint(const PrimaryCodebook& p, const SecondaryCodebook& s);

} // namespace hqmq
