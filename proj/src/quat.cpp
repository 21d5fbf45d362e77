#include "hqmq/quat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hqmq/errors.hpp"

namespace hqmq {

double Quaternion::operator[](int i) const {
    switch (i) {
    case 0: return w;
    case 1: return x;
    case 2: return y;
    case 3: return z;
    default: throw InvalidArgument("quaternion component index out of range");
    }
}

Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

Quaternion conjugate(const Quaternion& q) {
    return {q.w, -q.x, -q.y, -q.z};
}

double dot(const Quaternion& a, const Quaternion& b) {
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

double norm(const Quaternion& q) {
    return std::sqrt(dot(q, q));
}

Quaternion normalize(const Quaternion& q) {
    const double r = norm(q);
    if (!(r > 0.0)) {
        throw DegenerateChunk("cannot normalize a zero-norm quaternion");
    }
    return q * (1.0 / r);
}

double angle(const Quaternion& a, const Quaternion& b) {
    constexpr double kTol = 1e-6;
    if (std::abs(norm(a) - 1.0) > kTol || std::abs(norm(b) - 1.0) > kTol) {
        throw InvalidArgument("angle() requires unit quaternions");
    }
    return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

double chunk_angle(const Quaternion& a, const Quaternion& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 && nb == 0.0) {
        return 0.0;
    }
    if (na == 0.0 || nb == 0.0) {
        return std::numbers::pi / 2;
    }
    return std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0));
}

Quaternion haar_sample(Xoshiro256& rng) {
    for (;;) {
        Quaternion g;
        g.w = rng.gaussian();
        g.x = rng.gaussian();
        g.y = rng.gaussian();
        g.z = rng.gaussian();
        const double r = norm(g);
        if (r > 0.0) {
            return g * (1.0 / r);
        }
    }
}

} // namespace hqmq
