#include "hqmq/hurwitz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hqmq {

PrimaryCodebook::PrimaryCodebook() {
    std::size_t n = 0;
    for (int axis = 0; axis < 4; ++axis) {
        for (double sign : {1.0, -1.0}) {
            std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};
            c[axis] = sign;
            entries_[n++] = Quaternion::from_span(c);
        }
    }
    for (unsigned bits = 0; bits < 16; ++bits) {
        std::array<double, 4> c{};
        for (int comp = 0; comp < 4; ++comp) {
            c[comp] = ((bits >> (3 - comp)) & 1U) ? -0.5 : 0.5;
        }
        entries_[n++] = Quaternion::from_span(c);
    }
}

std::optional<std::size_t> PrimaryCodebook::index_of(const Quaternion& q) const {
    auto it = std::find(entries_.begin(), entries_.end(), q);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - entries_.begin());
}

PrimaryCodebook build_2t() {
    return PrimaryCodebook{};
}

bool GroupReport::ok() const {
    return closure && identity_index.has_value() && all_inverses && unexpected_angles == 0 &&
           min_angle_deg == 60.0;
}

GroupReport verify_group(const PrimaryCodebook& cb) {
    constexpr std::size_t n = PrimaryCodebook::kSize;
    GroupReport rep;

    rep.closure = true;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            auto idx = cb.index_of(hamilton(cb[a], cb[b]));
            rep.product_index[a][b] = idx.value_or(n);
            rep.closure = rep.closure && idx.has_value();
        }
    }

    rep.identity_index = cb.index_of(Quaternion{1.0, 0.0, 0.0, 0.0});
    rep.all_inverses = rep.identity_index.has_value();
    for (std::size_t a = 0; a < n; ++a) {
        // For unit quaternions the inverse is the conjugate.
        rep.inverse_index[a] = cb.index_of(conjugate(cb[a]));
        if (!rep.inverse_index[a] || !rep.identity_index) {
            rep.all_inverses = false;
            continue;
        }
        const Quaternion prod = hamilton(cb[a], cb[*rep.inverse_index[a]]);
        rep.all_inverses = rep.all_inverses && cb.index_of(prod) == rep.identity_index;
    }

    // Inner products of distinct entries are exact dyadics: ±1, ±½ or 0.
    constexpr std::array<std::pair<double, int>, 5> kSpectrum{{
        {1.0, 0}, {0.5, 60}, {0.0, 90}, {-0.5, 120}, {-1.0, 180}}};
    int min_deg = 360;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) {
                continue;
            }
            const double ip = dot(cb[a], cb[b]);
            auto it = std::find_if(kSpectrum.begin(), kSpectrum.end(),
                                   [ip](const auto& e) { return e.first == ip; });
            if (it == kSpectrum.end()) {
                ++rep.unexpected_angles;
                const int deg = static_cast<int>(
                    std::lround(std::acos(std::clamp(ip, -1.0, 1.0)) * 180.0 / std::numbers::pi));
                ++rep.angle_histogram[deg];
                min_deg = std::min(min_deg, deg);
                continue;
            }
            ++rep.angle_histogram[it->second];
            min_deg = std::min(min_deg, it->second);
        }
    }
    rep.min_angle_deg = static_cast<double>(min_deg);
    return rep;
}

} // namespace hqmq
