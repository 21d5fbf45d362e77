#include "hqmq/joint_codebook.hpp"

#include <cmath>
#include <string>

#include "hqmq/errors.hpp"

namespace hqmq {

namespace {

void require_unit(const Quaternion& u) {
    if (!(std::abs(norm(u) - 1.0) <= 1e-6)) {
        throw InvalidArgument("nearest() requires a unit quaternion");
    }
}

struct PrimaryMatch {
    std::size_t index;
    double cosine;
};

// Best element of 2T for direction w, lowest canonical index on ties.
PrimaryMatch best_primary(const Quaternion& w) {
    const std::array<double, 4> c = w.to_array();
    PrimaryMatch best{0, -2.0};
    for (std::size_t comp = 0; comp < 4; ++comp) {
        const double v = std::abs(c[comp]);
        if (v > best.cosine) {
            best = {2 * comp + (c[comp] < 0.0 ? 1 : 0), v};
        }
    }
    unsigned bits = 0;
    double half_sum = 0.0;
    for (std::size_t comp = 0; comp < 4; ++comp) {
        if (c[comp] < 0.0) {
            bits |= 1U << (3 - comp);
        }
        half_sum += 0.5 * std::abs(c[comp]);
    }
    if (half_sum > best.cosine) {
        best = {8 + bits, half_sum};
    }
    return best;
}

} // namespace

std::string_view role_name(Role r) {
    return r == Role::K ? "K" : "V";
}

Role parse_role(std::string_view s) {
    if (s == "K" || s == "k") {
        return Role::K;
    }
    if (s == "V" || s == "v") {
        return Role::V;
    }
    throw InvalidArgument("role must be K or V, got '" + std::string(s) + "'");
}

SecondaryCodebook build_secondary(std::uint64_t seed, std::uint32_t layer, std::uint32_t head,
                                  Role role, std::size_t S) {
    HQMQ_THROW_IF_NOT(S >= 1, InvalidArgument, "secondary codebook size must be >= 1");
    SecondaryCodebook cb;
    cb.seed = seed;
    cb.layer = layer;
    cb.head = head;
    cb.role = role;
    Xoshiro256 rng(derive_seed(seed, {layer, head, static_cast<std::uint64_t>(role)}));
    cb.entries.reserve(S);
    for (std::size_t i = 0; i < S; ++i) {
        cb.entries.push_back(haar_sample(rng));
    }
    return cb;
}

SecondaryCodebook make_secondary(std::vector<Quaternion> entries) {
    HQMQ_THROW_IF_NOT(!entries.empty(), InvalidArgument, "secondary codebook size must be >= 1");
    SecondaryCodebook cb;
    cb.entries = std::move(entries);
    return cb;
}

JointCodebook::JointCodebook(PrimaryCodebook primary, SecondaryCodebook secondary)
    : primary_(std::move(primary)), secondary_(std::move(secondary)) {
    HQMQ_THROW_IF_NOT(secondary_.size() >= 1, InvalidArgument, "empty secondary codebook");
    codewords_.reserve(PrimaryCodebook::kSize * secondary_.size());
    for (const Quaternion& qp : primary_.entries()) {
        for (const Quaternion& qs : secondary_.entries) {
            codewords_.push_back(hamilton(qp, qs));
        }
    }
}

NearestResult JointCodebook::nearest(const Quaternion& u) const {
    require_unit(u);
    std::size_t best = 0;
    double best_ip = -2.0;
    const std::size_t n = codewords_.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double ip = dot(u, codewords_[k]);
        if (ip > best_ip) {
            best_ip = ip;
            best = k;
        }
    }
    const std::size_t S = secondary_.size();
    return {best, best / S, best % S, std::clamp(best_ip, -1.0, 1.0)};
}

NearestResult JointCodebook::nearest_by_coset(const Quaternion& u) const {
    require_unit(u);
    const std::size_t S = secondary_.size();
    NearestResult best;
    best.cosine = -2.0;
    best.flat = codewords_.size();
    for (std::size_t s = 0; s < S; ++s) {
        // <u, q_p q_s> = <u conj(q_s), q_p> for unit q_s.
        const PrimaryMatch m = best_primary(hamilton(u, conjugate(secondary_.entries[s])));
        const std::size_t flat = m.index * S + s;
        if (m.cosine > best.cosine || (m.cosine == best.cosine && flat < best.flat)) {
            best = {flat, m.index, s, m.cosine};
        }
    }
    best.cosine = std::clamp(best.cosine, -1.0, 1.0);
    return best;
}

JointCodebook build_joint(const PrimaryCodebook& p, const SecondaryCodebook& s) {
    return JointCodebook(p, s);
}

} // namespace hqmq
