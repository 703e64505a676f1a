#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ctopt/errors.hpp"

namespace ctopt {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }

    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }

    constexpr bool operator==(const Vec3& o) const = default;

    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }

    constexpr Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }

    double norm() const { return std::sqrt(dot(*this)); }

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

/// Unit-norm direction. Construction normalizes; a zero-length input is a
/// degenerate-geometry error. Norm is 1 within 1e-12 by construction.
class UnitVec {
public:
    static UnitVec normalized(const Vec3& v) {
        const double n = v.norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw DegenerateGeometryError("cannot normalize zero or non-finite vector");
        }
        return UnitVec(v / n);
    }

    /// For components already known to be unit length (e.g. analytic
    /// constructions); still renormalizes to hold the invariant exactly.
    static UnitVec from_components(double x, double y, double z) {
        return normalized(Vec3{x, y, z});
    }

    const Vec3& vec() const { return v_; }
    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }

    double dot(const UnitVec& o) const { return v_.dot(o.v_); }
    double dot(const Vec3& o) const { return v_.dot(o); }
    UnitVec operator-() const { return UnitVec(-v_); }

    bool operator==(const UnitVec& o) const = default;

private:
    explicit UnitVec(const Vec3& v) : v_(v) {}
    Vec3 v_;
};

/// Angle between two unit vectors, radians in [0, pi].
inline double angle_between(const UnitVec& a, const UnitVec& b) {
    const double c = std::clamp(a.dot(b), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace ctopt
