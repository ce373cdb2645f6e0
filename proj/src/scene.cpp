#include "scenemotion/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "scenemotion/rng.hpp"

namespace scenemotion {

bool OrientedBox::footprint_overlaps(const OrientedBox& other) const {
    // SAT over the four face normals of the two yaw-rotated rectangles
    auto axes_of = [](const OrientedBox& b) {
        return std::array<Vec2, 2>{rotate2(Vec2(1, 0), b.yaw), rotate2(Vec2(0, 1), b.yaw)};
    };
    auto project = [](const OrientedBox& b, const Vec2& axis, double* lo, double* hi) {
        const Vec2 ax = rotate2(Vec2(1, 0), b.yaw) * b.half.x();
        const Vec2 ay = rotate2(Vec2(0, 1), b.yaw) * b.half.y();
        const double c = Vec2(b.center.x(), b.center.y()).dot(axis);
        const double r = std::abs(ax.dot(axis)) + std::abs(ay.dot(axis));
        *lo = c - r;
        *hi = c + r;
    };
    for (const auto& axis : {axes_of(*this)[0], axes_of(*this)[1], axes_of(other)[0], axes_of(other)[1]}) {
        double alo, ahi, blo, bhi;
        project(*this, axis, &alo, &ahi);
        project(other, axis, &blo, &bhi);
        if (ahi < blo || bhi < alo) return false;
    }
    return true;
}

const char* stage_name(StageType s) {
    switch (s) {
        case StageType::kLocomotion: return "locomotion";
        case StageType::kGrasp: return "grasp";
        case StageType::kPutDown: return "put_down";
        case StageType::kSceneObjectInteraction: return "scene_object_interaction";
        case StageType::kSmallObjectInteraction: return "small_object_interaction";
        case StageType::kStationary: return "stationary";
    }
    return "unknown";
}

StageType stage_from_name(const std::string& name) {
    if (name == "locomotion") return StageType::kLocomotion;
    if (name == "grasp") return StageType::kGrasp;
    if (name == "put_down") return StageType::kPutDown;
    if (name == "scene_object_interaction") return StageType::kSceneObjectInteraction;
    if (name == "small_object_interaction") return StageType::kSmallObjectInteraction;
    if (name == "stationary") return StageType::kStationary;
    throw std::runtime_error("unknown stage type: " + name);
}

std::optional<Vec3> SceneModel::object_location(const std::string& id) const {
    if (auto it = dynamic_objects.find(id); it != dynamic_objects.end()) return it->second.location;
    if (auto it = static_objects.find(id); it != static_objects.end()) return it->second.location;
    return std::nullopt;
}

void SceneModel::validate() const {
    const Vec3 e = bounds.extent();
    if (!(e.x() > 0 && e.y() > 0 && e.z() > 0))
        throw std::runtime_error("scene: degenerate bounds");
    for (const auto& b : obstacles) {
        if (!(b.half.x() > 0 && b.half.y() > 0 && b.half.z() > 0))
            throw std::runtime_error("scene: obstacle with nonpositive half extents");
    }
}

// ---------------------------------------------------------------------------
// Voxelization

namespace {

void voxelize_cells(const SceneModel& scene, VoxelGrid& g, bool parallel) {
    const std::int64_t n_columns = static_cast<std::int64_t>(g.nx) * g.ny;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t col = 0; col < n_columns; ++col) {
        const int ix = static_cast<int>(col % g.nx);
        const int iy = static_cast<int>(col / g.nx);
        for (int iz = 0; iz < g.nz; ++iz) {
            const Vec3 c = g.cell_center(ix, iy, iz);
            g.at(ix, iy, iz) = scene.occupied(c) ? 1 : 0;
        }
    }
}

VoxelGrid make_grid(const SceneModel& scene, double cell_size) {
    if (!(cell_size > 0)) throw std::runtime_error("voxelize: cell_size must be positive");
    scene.validate();
    VoxelGrid g;
    g.cell_size = cell_size;
    g.origin = scene.bounds.min;
    const Vec3 e = scene.bounds.extent();
    g.nx = std::max(1, static_cast<int>(std::ceil(e.x() / cell_size - 1e-9)));
    g.ny = std::max(1, static_cast<int>(std::ceil(e.y() / cell_size - 1e-9)));
    g.nz = std::max(1, static_cast<int>(std::ceil(e.z() / cell_size - 1e-9)));
    g.occupancy.assign(static_cast<std::size_t>(g.nx) * g.ny * g.nz, 0);
    return g;
}

}  // namespace

VoxelGrid voxelize_scene(const SceneModel& scene, double cell_size) {
    VoxelGrid g = make_grid(scene, cell_size);
    voxelize_cells(scene, g, true);
    return g;
}

VoxelGrid voxelize_scene_serial(const SceneModel& scene, double cell_size) {
    VoxelGrid g = make_grid(scene, cell_size);
    voxelize_cells(scene, g, false);
    return g;
}

// ---------------------------------------------------------------------------
// Local patches

namespace {

// Out-of-bounds cells count as occupied (unreachable space).
inline std::uint8_t patch_cell_occupied(const SceneModel& scene, const Vec3& p) {
    if (!scene.bounds.contains(p)) return 1;
    return scene.occupied(p) ? 1 : 0;
}

void fill_patch(const SceneModel& scene, LocalVoxelPatch& patch, bool parallel) {
    constexpr int n = LocalVoxelPatch::kCells;
#pragma omp parallel for schedule(static) if (parallel)
    for (int col = 0; col < n * n; ++col) {
        const int ix = col % n;
        const int iy = col / n;
        for (int iz = 0; iz < n; ++iz) {
            const Vec3 c = patch.cell_center_world(ix, iy, iz);
            patch.at(ix, iy, iz) = patch_cell_occupied(scene, c);
        }
    }
}

}  // namespace

LocalVoxelPatch extract_local_patch(const SceneModel& scene, const Vec3& center, double yaw) {
    LocalVoxelPatch patch;
    patch.center = center;
    patch.yaw = yaw;
    fill_patch(scene, patch, true);
    return patch;
}

LocalVoxelPatch extract_local_patch_serial(const SceneModel& scene, const Vec3& center, double yaw) {
    LocalVoxelPatch patch;
    patch.center = center;
    patch.yaw = yaw;
    fill_patch(scene, patch, false);
    return patch;
}

DualVoxel build_dual_voxel(const SceneModel& scene, const Vec3& pelvis_position,
                           double pelvis_yaw, StageType stage, const DualVoxelGoal& goal) {
    DualVoxel dv;
    dv.current = extract_local_patch(scene, pelvis_position, pelvis_yaw);

    switch (stage) {
        case StageType::kLocomotion: {
            if (!goal.point)
                throw std::runtime_error("build_dual_voxel: locomotion needs a goal point");
            Vec2 dir(goal.point->x() - pelvis_position.x(), goal.point->y() - pelvis_position.y());
            const double n = dir.norm();
            if (n < 1e-9) {
                dv.predictive = dv.current;  // already at the goal
                return dv;
            }
            dir /= n;
            const Vec3 center = pelvis_position + 0.8 * Vec3(dir.x(), dir.y(), 0.0);
            dv.predictive = extract_local_patch(scene, center, pelvis_yaw);
            return dv;
        }
        case StageType::kGrasp:
        case StageType::kPutDown:
        case StageType::kSceneObjectInteraction: {
            Vec3 center;
            if (goal.object_id) {
                const auto loc = scene.object_location(*goal.object_id);
                if (!loc)
                    throw std::runtime_error("build_dual_voxel: unresolvable object id '" +
                                             *goal.object_id + "'");
                center = *loc;
            } else if (goal.point) {
                center = *goal.point;
            } else {
                throw std::runtime_error("build_dual_voxel: object-centered stage needs a goal");
            }
            dv.predictive = extract_local_patch(scene, center, pelvis_yaw);
            return dv;
        }
        case StageType::kSmallObjectInteraction:
        case StageType::kStationary:
            dv.predictive = dv.current;
            return dv;
    }
    return dv;
}

// ---------------------------------------------------------------------------
// Walkability

bool is_walkable_segment(const WalkableMap& map, const Vec2& a, const Vec2& b) {
    if (!map.in_bounds(a) || !map.in_bounds(b)) return false;

    // Amanatides-Woo traversal over every cell the segment passes through.
    const double inv = 1.0 / map.cell_size;
    int ix = static_cast<int>((a.x() - map.origin.x()) * inv);
    int iy = static_cast<int>((a.y() - map.origin.y()) * inv);
    const int ix_end = static_cast<int>((b.x() - map.origin.x()) * inv);
    const int iy_end = static_cast<int>((b.y() - map.origin.y()) * inv);
    ix = std::clamp(ix, 0, map.nx - 1);
    iy = std::clamp(iy, 0, map.ny - 1);

    const Vec2 d = b - a;
    const int step_x = d.x() > 0 ? 1 : (d.x() < 0 ? -1 : 0);
    const int step_y = d.y() > 0 ? 1 : (d.y() < 0 ? -1 : 0);

    auto boundary_t = [&](double a0, double origin0, int i, int step, double dd) {
        if (step == 0) return std::numeric_limits<double>::infinity();
        const double edge = origin0 + (i + (step > 0 ? 1 : 0)) * map.cell_size;
        return (edge - a0) / dd;
    };
    double t_max_x = boundary_t(a.x(), map.origin.x(), ix, step_x, d.x());
    double t_max_y = boundary_t(a.y(), map.origin.y(), iy, step_y, d.y());
    const double t_delta_x = step_x ? map.cell_size / std::abs(d.x()) : std::numeric_limits<double>::infinity();
    const double t_delta_y = step_y ? map.cell_size / std::abs(d.y()) : std::numeric_limits<double>::infinity();

    while (true) {
        if (map.at(ix, iy)) return false;
        if (ix == std::clamp(ix_end, 0, map.nx - 1) && iy == std::clamp(iy_end, 0, map.ny - 1))
            return true;
        if (t_max_x < t_max_y) {
            if (t_max_x > 1.0) return true;
            ix += step_x;
            if (ix < 0 || ix >= map.nx) return true;
            t_max_x += t_delta_x;
        } else {
            if (t_max_y > 1.0) return true;
            iy += step_y;
            if (iy < 0 || iy >= map.ny) return true;
            t_max_y += t_delta_y;
        }
    }
}

// ---------------------------------------------------------------------------
// Penetration geometry

namespace {

double depth_at(const Vec3& p, const SceneModel& scene) {
    bool inside = false;
    for (const auto& b : scene.obstacles) {
        if (b.contains(p)) {
            inside = true;
            break;
        }
    }
    if (!inside) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.obstacles) best = std::min(best, b.surface_distance(p));
    return best;
}

}  // namespace

std::vector<double> penetration_depths(const std::vector<Vec3>& query_points,
                                       const SceneModel& scene) {
    std::vector<double> out(query_points.size(), 0.0);
    const std::int64_t n = static_cast<std::int64_t>(query_points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = depth_at(query_points[i], scene);
    return out;
}

std::vector<double> penetration_depths_serial(const std::vector<Vec3>& query_points,
                                              const SceneModel& scene) {
    std::vector<double> out(query_points.size(), 0.0);
    for (std::size_t i = 0; i < query_points.size(); ++i)
        out[i] = depth_at(query_points[i], scene);
    return out;
}

SurfaceSample closest_surface_point_and_normal(const Vec3& p, const DynamicObject& object) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < DynamicObject::kNumPoints; ++i) {
        const double d2 = (object.posed_point(i) - p).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return {object.posed_point(best), object.posed_normal(best)};
}

SurfaceSample closest_surface_point_and_normal(const Vec3& p, const SceneModel& scene) {
    if (scene.obstacles.empty())
        throw std::runtime_error("closest_surface_point_and_normal: scene has no obstacles");
    SurfaceSample best{};
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.obstacles) {
        const double d = b.surface_distance(p);
        if (d < best_d) {
            best_d = d;
            b.closest_surface_point(p, &best.point, &best.normal);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Walkable map

WalkableMap flatten_walkable(const VoxelGrid& grid, double band_min, double band_max) {
    if (!(band_max > band_min)) throw std::runtime_error("flatten_walkable: empty height band");
    const double z_lo = grid.origin.z();
    const double z_hi = grid.origin.z() + grid.nz * grid.cell_size;
    if (band_min > z_hi || band_max < z_lo)
        throw std::runtime_error("flatten_walkable: band outside grid vertical extent");

    WalkableMap m;
    m.nx = grid.nx;
    m.ny = grid.ny;
    m.origin = Vec2(grid.origin.x(), grid.origin.y());
    m.cell_size = grid.cell_size;
    m.occupancy.assign(static_cast<std::size_t>(m.nx) * m.ny, 0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            std::uint8_t occ = 0;
            for (int iz = 0; iz < grid.nz && !occ; ++iz) {
                const double z = grid.origin.z() + (iz + 0.5) * grid.cell_size;
                if (z >= band_min && z <= band_max && grid.at(ix, iy, iz)) occ = 1;
            }
            m.at(ix, iy) = occ;
        }
    }
    return m;
}

WalkableMap build_walkable_map(const SceneModel& scene, double cell_size, double band_lo,
                               double band_hi) {
    const VoxelGrid g = voxelize_scene(scene, cell_size);
    return flatten_walkable(g, scene.floor_height + band_lo, scene.floor_height + band_hi);
}

// ---------------------------------------------------------------------------
// Scene file I/O

namespace {

constexpr int kSceneFormatVersion = 1;

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
Vec3 vec3_from(const nlohmann::json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

}  // namespace

std::string scene_to_json(const SceneModel& scene) {
    nlohmann::json j;
    j["format_version"] = kSceneFormatVersion;
    j["bounds"] = {{"min", vec3_json(scene.bounds.min)}, {"max", vec3_json(scene.bounds.max)}};
    j["floor_height"] = scene.floor_height;
    auto obs = nlohmann::json::array();
    for (const auto& b : scene.obstacles)
        obs.push_back({{"center", vec3_json(b.center)}, {"half_extents", vec3_json(b.half)}, {"yaw", b.yaw}});
    j["obstacles"] = obs;
    auto dyn = nlohmann::json::array();
    for (const auto& [id, o] : scene.dynamic_objects) {
        nlohmann::json e;
        e["id"] = id;
        e["location"] = vec3_json(o.location);
        std::vector<double> rot(o.rotation.data(), o.rotation.data() + 9);
        e["rotation"] = rot;
        if (!o.generator.empty()) {
            e["generator"] = o.generator;
        } else {
            std::vector<double> pts(o.points.data(), o.points.data() + 256 * 3);
            std::vector<double> nrm(o.normals.data(), o.normals.data() + 256 * 3);
            e["points"] = pts;
            e["normals"] = nrm;
        }
        dyn.push_back(e);
    }
    j["dynamic_objects"] = dyn;
    auto sta = nlohmann::json::array();
    for (const auto& [id, o] : scene.static_objects)
        sta.push_back({{"id", id}, {"location", vec3_json(o.location)}, {"obstacle_index", o.obstacle_index}});
    j["static_objects"] = sta;
    return j.dump(2);
}

SceneModel scene_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != kSceneFormatVersion)
        throw std::runtime_error("scene: unsupported format_version");
    SceneModel s;
    s.bounds.min = vec3_from(j.at("bounds").at("min"));
    s.bounds.max = vec3_from(j.at("bounds").at("max"));
    s.floor_height = j.at("floor_height");
    for (const auto& e : j.at("obstacles")) {
        OrientedBox b;
        b.center = vec3_from(e.at("center"));
        b.half = vec3_from(e.at("half_extents"));
        b.yaw = e.at("yaw");
        s.obstacles.push_back(b);
    }
    for (const auto& e : j.at("dynamic_objects")) {
        DynamicObject o;
        if (e.contains("generator")) {
            o = make_object_from_generator(e.at("generator").get<std::string>());
        } else {
            const auto pts = e.at("points").get<std::vector<double>>();
            const auto nrm = e.at("normals").get<std::vector<double>>();
            std::copy(pts.begin(), pts.end(), o.points.data());
            std::copy(nrm.begin(), nrm.end(), o.normals.data());
        }
        o.location = vec3_from(e.at("location"));
        const auto rot = e.at("rotation").get<std::vector<double>>();
        std::copy(rot.begin(), rot.end(), o.rotation.data());
        s.dynamic_objects[e.at("id").get<std::string>()] = o;
    }
    for (const auto& e : j.at("static_objects")) {
        StaticObject o;
        o.location = vec3_from(e.at("location"));
        o.obstacle_index = e.at("obstacle_index");
        s.static_objects[e.at("id").get<std::string>()] = o;
    }
    s.validate();
    return s;
}

void save_scene(const SceneModel& scene, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("scene: cannot write " + path);
    f << scene_to_json(scene);
}

SceneModel load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("scene: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return scene_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Object generators

namespace {

// Deterministic, roughly uniform placement on a cylinder (caps included).
DynamicObject make_cylinder_cloud(double radius, double height) {
    DynamicObject o;
    const int n = DynamicObject::kNumPoints;
    const double side_area = 2 * kPi * radius * height;
    const double cap_area = 2 * kPi * radius * radius;
    const int n_side = static_cast<int>(std::round(n * side_area / (side_area + cap_area)));
    const int n_caps = n - n_side;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    int k = 0;
    for (int i = 0; i < n_side; ++i, ++k) {
        const double a = golden * i;
        const double z = height * (i + 0.5) / n_side - height / 2;
        o.points.row(k) << radius * std::cos(a), radius * std::sin(a), z;
        o.normals.row(k) << std::cos(a), std::sin(a), 0.0;
    }
    for (int i = 0; i < n_caps; ++i, ++k) {
        const bool top = (i % 2) == 0;
        const double r = radius * std::sqrt((i / 2 + 0.5) / (n_caps / 2.0 + 0.5));
        const double a = golden * i * 2.39996;
        o.points.row(k) << r * std::cos(a), r * std::sin(a), top ? height / 2 : -height / 2;
        o.normals.row(k) << 0.0, 0.0, top ? 1.0 : -1.0;
    }
    return o;
}

DynamicObject make_sphere_cloud(double radius) {
    DynamicObject o;
    const int n = DynamicObject::kNumPoints;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = golden * i;
        const Vec3 dir(r * std::cos(a), r * std::sin(a), z);
        o.points.row(i) = (radius * dir).transpose();
        o.normals.row(i) = dir.transpose();
    }
    return o;
}

}  // namespace

DynamicObject make_object_from_generator(const std::string& tag) {
    std::vector<std::string> parts;
    std::stringstream ss(tag);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    DynamicObject o;
    if (parts.size() == 3 && parts[0] == "cylinder") {
        o = make_cylinder_cloud(std::stod(parts[1]), std::stod(parts[2]));
    } else if (parts.size() == 2 && parts[0] == "sphere") {
        o = make_sphere_cloud(std::stod(parts[1]));
    } else {
        throw std::runtime_error("unknown object generator tag: " + tag);
    }
    o.generator = tag;
    return o;
}

}  // namespace scenemotion
