#pragma once

#include <array>
#include <cmath>

namespace irsim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Axis-aligned box given by its min and max corners.
struct Box {
    Vec3 lo;
    Vec3 hi;

    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }

    /// 2D footprint test, boundary counts as inside.
    bool footprint_contains(double x, double y) const {
        return x >= lo.x && x <= hi.x && y >= lo.y && y <= hi.y;
    }

    bool contains(const Box& inner) const {
        return inner.lo.x >= lo.x && inner.lo.y >= lo.y && inner.lo.z >= lo.z &&
               inner.hi.x <= hi.x && inner.hi.y <= hi.y && inner.hi.z <= hi.z;
    }
};

/// True iff the open segment a->b passes through the open interior of the box.
/// Slab method; touching a face (or an endpoint lying on the surface) does not
/// count as an intersection.
inline bool segment_intersects_box(const Vec3& a, const Vec3& b, const Box& box) {
    const std::array<double, 3> orig{a.x, a.y, a.z};
    const std::array<double, 3> dir{b.x - a.x, b.y - a.y, b.z - a.z};
    const std::array<double, 3> lo{box.lo.x, box.lo.y, box.lo.z};
    const std::array<double, 3> hi{box.hi.x, box.hi.y, box.hi.z};

    double t_enter = 0.0;
    double t_exit = 1.0;
    for (int ax = 0; ax < 3; ++ax) {
        if (dir[ax] == 0.0) {
            // Parallel to this slab: must lie strictly between the planes.
            if (orig[ax] <= lo[ax] || orig[ax] >= hi[ax]) return false;
            continue;
        }
        double t0 = (lo[ax] - orig[ax]) / dir[ax];
        double t1 = (hi[ax] - orig[ax]) / dir[ax];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
        if (t_enter >= t_exit) return false;  // open interval empty
    }
    return true;
}

}  // namespace irsim
