// SPDX-License-Identifier: Apache-2.0
//
// Minimal 3-D geometry kit for the scene simulator: vectors, axis-aligned
// boxes, segment/box occlusion with an open-interior convention, ray casting
// and mirror points for image-method reflections.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

namespace beamtrack {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        if (n == 0.0) throw std::invalid_argument("Vec3: cannot normalize zero vector");
        return {x / n, y / n, z / n};
    }
    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

struct Box {
    Vec3 lo;
    Vec3 hi;

    bool valid() const { return lo.x < hi.x && lo.y < hi.y && lo.z < hi.z; }
    Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
    bool contains_interior(const Vec3& p) const {
        return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
    }
    double lo_axis(int a) const { return a == 0 ? lo.x : (a == 1 ? lo.y : lo.z); }
    double hi_axis(int a) const { return a == 0 ? hi.x : (a == 1 ? hi.y : hi.z); }
};

// True iff the open segment p1->p2 passes through the interior of the box.
// Touching a face, edge or corner exactly does not count as blockage.
inline bool segment_intersects_interior(const Vec3& p1, const Vec3& p2, const Box& box) {
    const Vec3 d = p2 - p1;
    double t_lo = 0.0, t_hi = 1.0;
    for (int a = 0; a < 3; ++a) {
        const double origin = p1[a], delta = d[a];
        const double slab_lo = box.lo_axis(a), slab_hi = box.hi_axis(a);
        if (delta == 0.0) {
            if (origin <= slab_lo || origin >= slab_hi) return false;
        } else {
            double ta = (slab_lo - origin) / delta;
            double tb = (slab_hi - origin) / delta;
            if (ta > tb) std::swap(ta, tb);
            t_lo = std::max(t_lo, ta);
            t_hi = std::min(t_hi, tb);
            if (t_lo >= t_hi) return false;
        }
    }
    return t_lo < t_hi;
}

// True iff the open segment p1->p2 intersects any box interior.
inline bool los_blocked(const Vec3& p1, const Vec3& p2, std::span<const Box> boxes) {
    for (const Box& b : boxes)
        if (segment_intersects_interior(p1, p2, b)) return true;
    return false;
}

// Distance along the ray origin + t*dir (t > 0) to the nearest box surface.
// A ray starting inside the box hits the exit face. Returns nullopt on miss.
inline std::optional<double> ray_box_hit(const Vec3& origin, const Vec3& dir, const Box& box) {
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = origin[a], d = dir[a];
        const double slab_lo = box.lo_axis(a), slab_hi = box.hi_axis(a);
        if (d == 0.0) {
            if (o < slab_lo || o > slab_hi) return std::nullopt;
        } else {
            double ta = (slab_lo - o) / d;
            double tb = (slab_hi - o) / d;
            if (ta > tb) std::swap(ta, tb);
            t_lo = std::max(t_lo, ta);
            t_hi = std::min(t_hi, tb);
            if (t_lo > t_hi) return std::nullopt;
        }
    }
    if (t_hi <= 0.0) return std::nullopt;
    return t_lo > 0.0 ? t_lo : t_hi;
}

// One axis-aligned vertical facade of a box: the plane axis = plane_pos with
// outward normal sign along that axis.
struct Facade {
    int axis = 0;        // 0 = x, 1 = y
    double plane = 0.0;
    double normal = 1.0; // +1 or -1
    Box face_bounds;     // degenerate box describing the rectangle extent
};

inline std::array<Facade, 4> side_facades(const Box& b) {
    std::array<Facade, 4> f;
    f[0] = {0, b.lo.x, -1.0, Box{{b.lo.x, b.lo.y, b.lo.z}, {b.lo.x, b.hi.y, b.hi.z}}};
    f[1] = {0, b.hi.x, +1.0, Box{{b.hi.x, b.lo.y, b.lo.z}, {b.hi.x, b.hi.y, b.hi.z}}};
    f[2] = {1, b.lo.y, -1.0, Box{{b.lo.x, b.lo.y, b.lo.z}, {b.hi.x, b.lo.y, b.hi.z}}};
    f[3] = {1, b.hi.y, +1.0, Box{{b.lo.x, b.hi.y, b.lo.z}, {b.hi.x, b.hi.y, b.hi.z}}};
    return f;
}

inline Vec3 mirror_across_facade(const Vec3& p, const Facade& f) {
    Vec3 m = p;
    if (f.axis == 0)
        m.x = 2.0 * f.plane - p.x;
    else
        m.y = 2.0 * f.plane - p.y;
    return m;
}

// Antenna placement: position plus boresight azimuth. The array axis lies in
// the ground plane, perpendicular to boresight.
struct Pose {
    Vec3 pos;
    double heading = 0.0;
};

struct LocalAngles {
    double az = 0.0;
    double el = 0.0;
};

// Direction of unit vector u expressed in the pose's local frame:
// azimuth from boresight in [-pi, pi], elevation from horizontal.
inline LocalAngles local_angles(const Pose& pose, const Vec3& u) {
    const double c = std::cos(pose.heading), s = std::sin(pose.heading);
    const double ux = u.x * c + u.y * s;
    const double uy = -u.x * s + u.y * c;
    return {std::atan2(uy, ux), std::asin(std::clamp(u.z, -1.0, 1.0))};
}

// 2-D footprint overlap helper (z ignored).
inline bool footprints_overlap(const Box& a, const Box& b) {
    return a.lo.x < b.hi.x && b.lo.x < a.hi.x && a.lo.y < b.hi.y && b.lo.y < a.hi.y;
}

}  // namespace beamtrack
