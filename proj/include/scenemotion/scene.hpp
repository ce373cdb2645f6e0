#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scenemotion/geometry.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Types

// Movable object: 256 surface points with outward unit normals in the object
// frame, plus a world pose.
struct DynamicObject {
    static constexpr int kNumPoints = 256;

    Eigen::Matrix<double, kNumPoints, 3> points;   // object frame, meters
    Eigen::Matrix<double, kNumPoints, 3> normals;  // unit, outward
    Vec3 location{Vec3::Zero()};
    Mat3 rotation{Mat3::Identity()};
    std::string generator;  // e.g. "cylinder:0.04:0.22", kept for round-trips

    Vec3 posed_point(int i) const { return rotation * points.row(i).transpose() + location; }
    Vec3 posed_normal(int i) const { return rotation * normals.row(i).transpose(); }
};

// Static scene object: a named location tied to an obstacle (seats etc.).
struct StaticObject {
    Vec3 location{Vec3::Zero()};
    int obstacle_index = -1;
};

struct SceneModel {
    Aabb bounds;
    double floor_height = 0.0;
    std::vector<OrientedBox> obstacles;
    std::map<std::string, DynamicObject> dynamic_objects;
    std::map<std::string, StaticObject> static_objects;

    bool occupied(const Vec3& p) const {
        for (const auto& b : obstacles)
            if (b.contains(p)) return true;
        return false;
    }
    std::optional<Vec3> object_location(const std::string& id) const;

    void validate() const;  // throws on degenerate bounds / nonpositive extents
};

struct VoxelGrid {
    std::vector<std::uint8_t> occupancy;  // x-fastest layout
    int nx = 0, ny = 0, nz = 0;
    Vec3 origin{Vec3::Zero()};
    double cell_size = 0.0;

    std::uint8_t& at(int ix, int iy, int iz) {
        return occupancy[static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx) * (iy + static_cast<std::size_t>(ny) * iz)];
    }
    std::uint8_t at(int ix, int iy, int iz) const {
        return occupancy[static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx) * (iy + static_cast<std::size_t>(ny) * iz)];
    }
    Vec3 cell_center(int ix, int iy, int iz) const {
        return origin + cell_size * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
    }
};

// 32^3 local occupancy patch, 1.2 m per side, yaw-aligned.
struct LocalVoxelPatch {
    static constexpr int kCells = 32;
    static constexpr double kSideLength = 1.2;
    static constexpr double kCellSize = kSideLength / kCells;  // 0.0375 m

    std::vector<std::uint8_t> occupancy;  // kCells^3, x-fastest
    Vec3 center{Vec3::Zero()};
    double yaw = 0.0;

    LocalVoxelPatch() : occupancy(kCells * kCells * kCells, 0) {}

    std::uint8_t& at(int ix, int iy, int iz) {
        return occupancy[static_cast<std::size_t>(ix) + kCells * (iy + static_cast<std::size_t>(kCells) * iz)];
    }
    std::uint8_t at(int ix, int iy, int iz) const {
        return occupancy[static_cast<std::size_t>(ix) + kCells * (iy + static_cast<std::size_t>(kCells) * iz)];
    }
    // Center of cell (ix,iy,iz) in world coordinates. Local axes are the
    // yaw-rotated frame; +y local faces along yaw.
    Vec3 cell_center_world(int ix, int iy, int iz) const {
        const Vec3 local((ix + 0.5) * kCellSize - 0.5 * kSideLength,
                         (iy + 0.5) * kCellSize - 0.5 * kSideLength,
                         (iz + 0.5) * kCellSize - 0.5 * kSideLength);
        const Vec2 xy = rotate2(Vec2(local.x(), local.y()), yaw);
        return center + Vec3(xy.x(), xy.y(), local.z());
    }
};

struct DualVoxel {
    LocalVoxelPatch current;
    LocalVoxelPatch predictive;
};

// 0 = walkable, 1 = occupied.
struct WalkableMap {
    std::vector<std::uint8_t> occupancy;
    int nx = 0, ny = 0;
    Vec2 origin{Vec2::Zero()};
    double cell_size = 0.0;

    std::uint8_t at(int ix, int iy) const {
        return occupancy[static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx) * iy];
    }
    std::uint8_t& at(int ix, int iy) {
        return occupancy[static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx) * iy];
    }
    bool in_bounds(const Vec2& p) const {
        return p.x() >= origin.x() && p.y() >= origin.y() &&
               p.x() < origin.x() + nx * cell_size && p.y() < origin.y() + ny * cell_size;
    }
};

enum class StageType {
    kLocomotion,
    kGrasp,
    kPutDown,
    kSceneObjectInteraction,
    kSmallObjectInteraction,
    kStationary,
};

const char* stage_name(StageType s);
StageType stage_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Operations. The _serial variants are the reference implementations; the
// unsuffixed entry points run the same computation with OpenMP and must match
// them bit for bit.

VoxelGrid voxelize_scene(const SceneModel& scene, double cell_size);
VoxelGrid voxelize_scene_serial(const SceneModel& scene, double cell_size);

LocalVoxelPatch extract_local_patch(const SceneModel& scene, const Vec3& center, double yaw);
LocalVoxelPatch extract_local_patch_serial(const SceneModel& scene, const Vec3& center, double yaw);

// Stage rules for the predictive patch: locomotion places it 0.8 m toward the
// goal at pelvis height; object-centered stages align it with the object
// location; hand-held small-object and stationary stages copy the current
// patch.
struct DualVoxelGoal {
    std::optional<Vec3> point;      // world
    std::optional<std::string> object_id;
};
DualVoxel build_dual_voxel(const SceneModel& scene, const Vec3& pelvis_position,
                           double pelvis_yaw, StageType stage, const DualVoxelGoal& goal);

bool is_walkable_segment(const WalkableMap& map, const Vec2& a, const Vec2& b);

std::vector<double> penetration_depths(const std::vector<Vec3>& query_points,
                                       const SceneModel& scene);
std::vector<double> penetration_depths_serial(const std::vector<Vec3>& query_points,
                                              const SceneModel& scene);

struct SurfaceSample {
    Vec3 point;
    Vec3 normal;
};
SurfaceSample closest_surface_point_and_normal(const Vec3& p, const DynamicObject& object);
SurfaceSample closest_surface_point_and_normal(const Vec3& p, const SceneModel& scene);

WalkableMap flatten_walkable(const VoxelGrid& grid, double band_min, double band_max);

// Convenience: voxelize at `cell_size` and flatten over the character-height
// band above the floor.
WalkableMap build_walkable_map(const SceneModel& scene, double cell_size = 0.05,
                               double band_lo = 0.1, double band_hi = 1.8);

// ---------------------------------------------------------------------------
// Scene file I/O (JSON document with a format_version field).

std::string scene_to_json(const SceneModel& scene);
SceneModel scene_from_json(const std::string& text);
void save_scene(const SceneModel& scene, const std::string& path);
SceneModel load_scene(const std::string& path);

// Deterministic surface point clouds for small objects.
DynamicObject make_object_from_generator(const std::string& tag);

}  // namespace scenemotion
