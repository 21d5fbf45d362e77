#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>

#include "hqmq/quat.hpp"

namespace hqmq {

/// The 24 unit Hurwitz quaternions (binary tetrahedral group 2T, the
/// vertices of the 24-cell).
///
/// Canonical order, which the packed format relies on:
///   0..7   +1, -1, +i, -i, +j, -j, +k, -k
///   8..23  ½(s_w + s_x i + s_y j + s_z k) for pattern bits b = 0..15, where
///          component c (w=0 .. z=3) is negative iff bit (3 - c) of b is set.
/// Components are 0, ±1, ±0.5, all exact in binary floating point, so
/// products of entries can be matched with exact equality.
class PrimaryCodebook {
public:
    static constexpr std::size_t kSize = 24;

    PrimaryCodebook();

    const std::array<Quaternion, kSize>& entries() const { return entries_; }
    const Quaternion& operator[](std::size_t i) const { return entries_[i]; }
    std::size_t size() const { return kSize; }

    /// Exact component match; nullopt if `q` is not an entry.
    std::optional<std::size_t> index_of(const Quaternion& q) const;

private:
    std::array<Quaternion, kSize> entries_;
};

PrimaryCodebook build_2t();

struct GroupReport {
    bool closure = false;
    std::optional<std::size_t> identity_index;
    /// inverse_index[i] is the index of entries[i]^-1, or nullopt.
    std::array<std::optional<std::size_t>, PrimaryCodebook::kSize> inverse_index{};
    bool all_inverses = false;
    /// Angle (whole degrees) -> number of ordered pairs (i != j) at that angle.
    std::map<int, std::size_t> angle_histogram;
    /// Pairs whose inner product is not one of {±1, ±½, 0}.
    std::size_t unexpected_angles = 0;
    double min_angle_deg = 0.0;
    /// product_index[a][b] = index of entries[a]·entries[b] (or 24 if absent).
    std::array<std::array<std::size_t, PrimaryCodebook::kSize>, PrimaryCodebook::kSize> product_index{};

    bool ok() const;
};

/// Exhaustive check of the group structure: 24x24 closure table, identity,
/// inverses and the pairwise angle spectrum.
GroupReport verify_group(const PrimaryCodebook& cb);

} // namespace hqmq
