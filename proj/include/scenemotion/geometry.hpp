#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace scenemotion {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

// Rotation about +z by angle psi (radians).
inline Mat3 yaw_rotation(double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    Mat3 r;
    r << c, -s, 0.0,
         s,  c, 0.0,
         0.0, 0.0, 1.0;
    return r;
}

inline Vec2 rotate2(const Vec2& v, double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

struct Aabb {
    Vec3 min{Vec3::Zero()};
    Vec3 max{Vec3::Zero()};

    bool contains(const Vec3& p) const {
        return p.x() >= min.x() && p.x() <= max.x() &&
               p.y() >= min.y() && p.y() <= max.y() &&
               p.z() >= min.z() && p.z() <= max.z();
    }
    Vec3 extent() const { return max - min; }
    double volume() const {
        const Vec3 e = extent();
        return e.x() * e.y() * e.z();
    }
};

// Box with yaw-only orientation: full 3d center, half extents in the box
// frame, rotation about the vertical axis.
struct OrientedBox {
    Vec3 center{Vec3::Zero()};
    Vec3 half{Vec3::Zero()};
    double yaw = 0.0;

    // World point -> box-local coordinates.
    Vec3 to_local(const Vec3& p) const {
        const Vec3 d = p - center;
        const Vec2 xy = rotate2(Vec2(d.x(), d.y()), -yaw);
        return Vec3(xy.x(), xy.y(), d.z());
    }
    Vec3 to_world(const Vec3& local) const {
        const Vec2 xy = rotate2(Vec2(local.x(), local.y()), yaw);
        return center + Vec3(xy.x(), xy.y(), local.z());
    }

    bool contains(const Vec3& p) const {
        const Vec3 q = to_local(p);
        return std::abs(q.x()) <= half.x() &&
               std::abs(q.y()) <= half.y() &&
               std::abs(q.z()) <= half.z();
    }

    // Unsigned distance from p to the box boundary (surface), whether p is
    // inside or outside.
    double surface_distance(const Vec3& p) const {
        const Vec3 q = to_local(p);
        const Vec3 a(std::abs(q.x()), std::abs(q.y()), std::abs(q.z()));
        const Vec3 d = a - half;
        if (d.x() <= 0.0 && d.y() <= 0.0 && d.z() <= 0.0) {
            return -std::max({d.x(), d.y(), d.z()});  // inside: nearest face
        }
        const Vec3 outside(std::max(d.x(), 0.0), std::max(d.y(), 0.0), std::max(d.z(), 0.0));
        return outside.norm();
    }

    // Closest point on the boundary plus its outward unit normal.
    void closest_surface_point(const Vec3& p, Vec3* point, Vec3* normal) const {
        Vec3 q = to_local(p);
        const Vec3 a(std::abs(q.x()), std::abs(q.y()), std::abs(q.z()));
        const Vec3 d = a - half;
        Vec3 local_pt, local_n;
        if (d.x() <= 0.0 && d.y() <= 0.0 && d.z() <= 0.0) {
            // inside: project to nearest face; axis order breaks ties
            int axis = 0;
            double best = -d.x();
            if (-d.y() < best) { best = -d.y(); axis = 1; }
            if (-d.z() < best) { best = -d.z(); axis = 2; }
            local_pt = q;
            const double sign = q[axis] >= 0.0 ? 1.0 : -1.0;
            local_pt[axis] = sign * half[axis];
            local_n = Vec3::Zero();
            local_n[axis] = sign;
        } else {
            local_pt = Vec3(std::clamp(q.x(), -half.x(), half.x()),
                            std::clamp(q.y(), -half.y(), half.y()),
                            std::clamp(q.z(), -half.z(), half.z()));
            const Vec3 diff = q - local_pt;
            const double n = diff.norm();
            if (n > 1e-12) {
                local_n = diff / n;
            } else {
                // exactly on the surface: pick the face we sit on
                int axis = 0;
                double best = half.x() - a.x();
                if (half.y() - a.y() < best) { best = half.y() - a.y(); axis = 1; }
                if (half.z() - a.z() < best) { axis = 2; }
                local_n = Vec3::Zero();
                local_n[axis] = q[axis] >= 0.0 ? 1.0 : -1.0;
            }
        }
        if (point) *point = to_world(local_pt);
        if (normal) {
            const Vec2 nxy = rotate2(Vec2(local_n.x(), local_n.y()), yaw);
            *normal = Vec3(nxy.x(), nxy.y(), local_n.z());
        }
    }

    // 2d footprint overlap via separating axes (yaw boxes only).
    bool footprint_overlaps(const OrientedBox& other) const;
};

}  // namespace scenemotion
