#pragma once

#include <array>
#include <span>

#include "hqmq/random.hpp"

namespace hqmq {

/// A quaternion w + xi + yj + zk. Used both for 4-element data chunks and
/// for codewords on the unit 3-sphere.
struct Quaternion {
    double w = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Quaternion&, const Quaternion&) = default;

    Quaternion operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
    Quaternion operator-(const Quaternion& o) const {
        return {w - o.w, x - o.x, y - o.y, z - o.z};
    }

    double operator[](int i) const;

    static Quaternion from_span(std::span<const double, 4> v) { return {v[0], v[1], v[2], v[3]}; }
    std::array<double, 4> to_array() const { return {w, x, y, z}; }
};

/// Hamilton product a·b.
Quaternion hamilton(const Quaternion& a, const Quaternion& b);

Quaternion conjugate(const Quaternion& q);

double dot(const Quaternion& a, const Quaternion& b);

/// Euclidean 4-norm.
double norm(const Quaternion& q);

/// q / |q|. Throws DegenerateChunk on a zero quaternion.
Quaternion normalize(const Quaternion& q);

/// Angle between two unit quaternions in [0, π], via the clamped inner
/// product. Throws InvalidArgument if either norm is off by more than 1e-6.
double angle(const Quaternion& a, const Quaternion& b);

/// Angle between two arbitrary chunks: 0 if both are zero, π/2 if exactly
/// one is zero, otherwise the angle between their directions.
double chunk_angle(const Quaternion& a, const Quaternion& b);

/// Haar-uniform unit quaternion: four Box-Muller normals, normalized. An
/// all-zero draw is discarded and redrawn.
Quaternion haar_sample(Xoshiro256& rng);

} // namespace hqmq
