#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "scenemotion/rng.hpp"
#include "scenemotion/scene.hpp"

#include "oracles.hpp"

using namespace scenemotion;

namespace {

SceneModel empty_room() {
    SceneModel s;
    s.bounds.min = Vec3(-4, -4, 0);
    s.bounds.max = Vec3(4, 4, 2.6);
    s.floor_height = 0;
    return s;
}

// Oracle point-in-box: 2d half-plane tests against the footprint edges plus a
// z interval check. Independent of OrientedBox::contains' frame transform.
bool oracle_inside(const OrientedBox& b, const Vec3& p) {
    if (p.z() < b.center.z() - b.half.z() - 1e-15 || p.z() > b.center.z() + b.half.z() + 1e-15)
        return false;
    const Vec2 ex = rotate2(Vec2(1, 0), b.yaw);
    const Vec2 ey = rotate2(Vec2(0, 1), b.yaw);
    const Vec2 c(b.center.x(), b.center.y());
    const Vec2 q(p.x(), p.y());
    // corners counterclockwise
    const Vec2 corners[4] = {c + b.half.x() * ex + b.half.y() * ey, c - b.half.x() * ex + b.half.y() * ey,
                             c - b.half.x() * ex - b.half.y() * ey, c + b.half.x() * ex - b.half.y() * ey};
    for (int i = 0; i < 4; ++i) {
        const Vec2 e = corners[(i + 1) % 4] - corners[i];
        const Vec2 v = q - corners[i];
        if (e.x() * v.y() - e.y() * v.x() < -1e-12) return false;
    }
    return true;
}

bool oracle_occupied(const SceneModel& s, const Vec3& p) {
    if (!s.bounds.contains(p)) return true;
    for (const auto& b : s.obstacles)
        if (oracle_inside(b, p)) return true;
    return false;
}

SceneModel cluttered_room(Rng& rng, int n_obstacles) {
    SceneModel s = empty_room();
    for (int i = 0; i < n_obstacles; ++i) {
        OrientedBox b;
        b.half = Vec3(rng.uniform(0.15, 0.5), rng.uniform(0.15, 0.5), rng.uniform(0.2, 1.0));
        b.center = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), b.half.z());
        b.yaw = rng.uniform(-kPi, kPi);
        s.obstacles.push_back(b);
    }
    return s;
}

}  // namespace

TEST_CASE("voxelize: empty scene is all zeros") {
    const auto g = voxelize_scene(empty_room(), 0.25);
    for (auto v : g.occupancy) CHECK(v == 0);
}

TEST_CASE("voxelize: unit box occupies exactly the cells whose centers are inside") {
    SceneModel s = empty_room();
    OrientedBox b;
    b.center = Vec3(0.03, -0.07, 0.5);
    b.half = Vec3(0.5, 0.5, 0.5);
    b.yaw = 0.3;
    s.obstacles.push_back(b);
    const auto g = voxelize_scene(s, 0.1);
    int occupied = 0;
    for (int iz = 0; iz < g.nz; ++iz)
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const bool want = oracle_inside(b, g.cell_center(ix, iy, iz));
                CHECK(static_cast<bool>(g.at(ix, iy, iz)) == want);
                occupied += want;
            }
    CHECK(occupied > 0);
}

TEST_CASE("voxelize: obstacle fully outside bounds leaves the grid empty") {
    SceneModel s = empty_room();
    OrientedBox b;
    b.center = Vec3(50, 50, 1);
    b.half = Vec3(0.5, 0.5, 0.5);
    s.obstacles.push_back(b);
    const auto g = voxelize_scene(s, 0.25);
    for (auto v : g.occupancy) CHECK(v == 0);
}

TEST_CASE("voxelize: degenerate bounds rejected") {
    SceneModel s;
    s.bounds.min = Vec3(0, 0, 0);
    s.bounds.max = Vec3(1, 1, 0);
    CHECK_THROWS(voxelize_scene(s, 0.1));
    CHECK_THROWS(voxelize_scene(empty_room(), 0.0));
}

TEST_CASE("voxelize: parallel matches serial") {
    Rng rng(11);
    const auto s = cluttered_room(rng, 7);
    const auto a = voxelize_scene(s, 0.13);
    const auto b = voxelize_scene_serial(s, 0.13);
    CHECK(a.occupancy == b.occupancy);
}

TEST_CASE("patch: empty scene gives all zeros") {
    const SceneModel s = empty_room();
    Rng rng(3);
    for (int i = 0; i < 5; ++i) {
        // stay >0.6m inside bounds so no cell is out of bounds
        const Vec3 c(rng.uniform(-3.3, 3.3), rng.uniform(-3.3, 3.3), rng.uniform(0.7, 1.9));
        const auto p = extract_local_patch(s, c, rng.uniform(-kPi, kPi));
        for (auto v : p.occupancy) CHECK(v == 0);
    }
}

TEST_CASE("patch: matches per-cell brute force on 100 random scenes/poses") {
    Rng rng(17);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto sub = rng.child(trial);
        const auto s = cluttered_room(sub, sub.uniform_int(1, 8));
        const Vec3 center(sub.uniform(-3.5, 3.5), sub.uniform(-3.5, 3.5), sub.uniform(0.6, 1.4));
        const double yaw = sub.uniform(-kPi, kPi);
        const auto p = extract_local_patch(s, center, yaw);
        for (int iz = 0; iz < 32; iz += 3)
            for (int iy = 0; iy < 32; iy += 3)
                for (int ix = 0; ix < 32; ix += 3) {
                    const bool want = oracle_occupied(s, p.cell_center_world(ix, iy, iz));
                    REQUIRE(static_cast<bool>(p.at(ix, iy, iz)) == want);
                    ++checked;
                }
    }
    CHECK(checked > 100000);
}

TEST_CASE("patch: parallel matches serial") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        auto sub = rng.child(trial);
        const auto s = cluttered_room(sub, 6);
        const Vec3 center(sub.uniform(-3, 3), sub.uniform(-3, 3), 0.95);
        const double yaw = sub.uniform(-kPi, kPi);
        CHECK(extract_local_patch(s, center, yaw).occupancy ==
              extract_local_patch_serial(s, center, yaw).occupancy);
    }
}

TEST_CASE("patch: yaw equivariance for quarter turns on axis-aligned scenes") {
    Rng rng(41);
    SceneModel s = empty_room();
    for (int i = 0; i < 5; ++i) {
        OrientedBox b;
        b.half = Vec3(rng.uniform(0.15, 0.4), rng.uniform(0.15, 0.4), rng.uniform(0.3, 1.0));
        b.center = Vec3(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), b.half.z());
        b.yaw = 0.0;
        s.obstacles.push_back(b);
    }
    const Vec3 center(0.4, -0.3, 0.95);
    const auto p0 = extract_local_patch(s, center, 0.0);

    // Rotating the frame by +90deg: local x' = old y, local y' = -old x.
    auto rotated_quarter = [&](const LocalVoxelPatch& p, int quarters) {
        LocalVoxelPatch out = p;
        constexpr int n = LocalVoxelPatch::kCells;
        for (int iz = 0; iz < n; ++iz)
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix) {
                    int sx = ix, sy = iy;
                    for (int q = 0; q < quarters; ++q) {
                        const int tx = n - 1 - sy;
                        const int ty = sx;
                        sx = tx;
                        sy = ty;
                    }
                    out.at(ix, iy, iz) = p.at(sx, sy, iz);
                }
        return out;
    };
    for (int q = 1; q <= 3; ++q) {
        const auto pq = extract_local_patch(s, center, q * kPi / 2.0);
        CHECK(pq.occupancy == rotated_quarter(p0, q).occupancy);
    }
}

TEST_CASE("dual voxel: locomotion offset is exactly 0.8 m horizontal") {
    Rng rng(5);
    const auto s = cluttered_room(rng, 4);
    const Vec3 pelvis(0.2, 0.1, 0.95);
    DualVoxelGoal goal;
    goal.point = Vec3(0.2, 3.0, 0.95);  // due +y
    const auto dv = build_dual_voxel(s, pelvis, 0.0, StageType::kLocomotion, goal);
    CHECK(dv.predictive.center.x() == doctest::Approx(pelvis.x()).epsilon(1e-12));
    CHECK(dv.predictive.center.y() == doctest::Approx(pelvis.y() + 0.8).epsilon(1e-12));
    CHECK(dv.predictive.center.z() == doctest::Approx(pelvis.z()).epsilon(1e-12));
    const double d = (dv.predictive.center - dv.current.center).norm();
    CHECK(d == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(dv.predictive.yaw == dv.current.yaw);
}

TEST_CASE("dual voxel: small-object stage copies the current patch") {
    Rng rng(6);
    const auto s = cluttered_room(rng, 4);
    const auto dv = build_dual_voxel(s, Vec3(0.5, -0.2, 0.95), 0.7,
                                     StageType::kSmallObjectInteraction, {});
    CHECK(dv.predictive.occupancy == dv.current.occupancy);
    CHECK(dv.predictive.center == dv.current.center);
}

TEST_CASE("dual voxel: object-centered stage centers on the object") {
    SceneModel s = empty_room();
    OrientedBox seat;
    seat.center = Vec3(1.5, 1.0, 0.225);
    seat.half = Vec3(0.4, 0.4, 0.225);
    s.obstacles.push_back(seat);
    s.static_objects["sofa"] = StaticObject{Vec3(1.5, 1.0, 0.45), 0};
    DualVoxelGoal goal;
    goal.object_id = "sofa";
    const auto dv = build_dual_voxel(s, Vec3(0, 0, 0.95), 0.3,
                                     StageType::kSceneObjectInteraction, goal);
    CHECK((dv.predictive.center - Vec3(1.5, 1.0, 0.45)).norm() == doctest::Approx(0.0));
    CHECK(dv.predictive.yaw == doctest::Approx(0.3));

    DualVoxelGoal bad;
    bad.object_id = "missing";
    CHECK_THROWS(build_dual_voxel(s, Vec3(0, 0, 0.95), 0.3,
                                  StageType::kSceneObjectInteraction, bad));
}

TEST_CASE("walkable segment: open room, through-wall, and symmetry") {
    WalkableMap m;
    m.nx = 20;
    m.ny = 20;
    m.origin = Vec2(0, 0);
    m.cell_size = 0.05;
    m.occupancy.assign(400, 0);
    CHECK(is_walkable_segment(m, Vec2(0.1, 0.1), Vec2(0.9, 0.8)));
    m.at(10, 10) = 1;  // cell [0.5,0.55)x[0.5,0.55)
    CHECK_FALSE(is_walkable_segment(m, Vec2(0.2, 0.525), Vec2(0.8, 0.525)));
    CHECK(is_walkable_segment(m, Vec2(0.2, 0.2), Vec2(0.3, 0.8)));
    CHECK_FALSE(is_walkable_segment(m, Vec2(-1, 0.5), Vec2(0.5, 0.5)));  // out of bounds
}

TEST_CASE("walkable segment: matches supersampled oracle on 100 random segment pairs") {
    Rng rng(23);
    WalkableMap m;
    m.nx = 20;
    m.ny = 20;
    m.origin = Vec2(0, 0);
    m.cell_size = 0.05;
    m.occupancy.assign(400, 0);
    for (auto& c : m.occupancy) c = rng.bernoulli(0.18) ? 1 : 0;

    auto oracle = [&](const Vec2& a, const Vec2& b) {
        for (int i = 0; i <= 1000; ++i) {
            const Vec2 p = a + (b - a) * (i / 1000.0);
            const int ix = static_cast<int>((p.x() - m.origin.x()) / m.cell_size);
            const int iy = static_cast<int>((p.y() - m.origin.y()) / m.cell_size);
            if (ix < 0 || ix >= m.nx || iy < 0 || iy >= m.ny) continue;
            if (m.at(ix, iy)) return false;
        }
        return true;
    };

    int agreements = 0;
    for (int i = 0; i < 100; ++i) {
        const Vec2 a(rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99));
        const Vec2 b(rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99));
        const bool got = is_walkable_segment(m, a, b);
        const bool want = oracle(a, b);
        CHECK(got == want);
        agreements += (got == want);
        // symmetry
        CHECK(is_walkable_segment(m, b, a) == got);
    }
    CHECK(agreements == 100);
}

TEST_CASE("penetration depth: analytic box cases") {
    SceneModel s = empty_room();
    OrientedBox b;
    b.center = Vec3(0, 0, 0.5);
    b.half = Vec3(0.5, 0.5, 0.5);
    s.obstacles.push_back(b);

    const auto d = penetration_depths({Vec3(2, 2, 0.5),      // outside
                                       Vec3(0.45, 0, 0.5),   // 0.05 inside +x face
                                       Vec3(0, 0, 0.98)},    // 0.02 below top
                                      s);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(d[2] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("penetration depth: matches dense sampled-surface oracle within 1e-3") {
    Rng rng(31);
    const auto s = cluttered_room(rng, 5);

    std::vector<Vec3> queries;
    for (int i = 0; i < 120; ++i) {
        const auto& b = s.obstacles[rng.uniform_int(0, static_cast<int>(s.obstacles.size()) - 1)];
        const Vec3 local(rng.uniform(-1.2, 1.2) * b.half.x(), rng.uniform(-1.2, 1.2) * b.half.y(),
                         rng.uniform(-1.2, 1.2) * b.half.z());
        queries.push_back(b.to_world(local));
    }
    const auto depths = penetration_depths(queries, s);
    const auto depths_serial = penetration_depths_serial(queries, s);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        CHECK(depths[i] == depths_serial[i]);
        CHECK(depths[i] >= 0.0);
        bool inside = false;
        for (const auto& b : s.obstacles) inside = inside || b.contains(queries[i]);
        if (!inside) {
            CHECK(depths[i] == 0.0);
            continue;
        }
        const double want = oracles::sampled_penetration_depth(s, queries[i]);
        CHECK(std::abs(depths[i] - want) < 1e-3);
    }
}

TEST_CASE("closest surface point: dynamic object linear scan") {
    auto obj = make_object_from_generator("sphere:0.05");
    obj.location = Vec3(1, 2, 0.8);

    // coincides with a surface sample
    const Vec3 sp = obj.posed_point(17);
    const auto hit = closest_surface_point_and_normal(sp, obj);
    CHECK((hit.point - sp).norm() == doctest::Approx(0.0));
    CHECK((hit.normal - obj.posed_normal(17)).norm() == doctest::Approx(0.0));

    // above the sphere: nearest sample is one of the top ones
    const auto top = closest_surface_point_and_normal(obj.location + Vec3(0, 0, 0.2), obj);
    CHECK(top.point.z() > obj.location.z() + 0.04);
    CHECK(top.normal.z() > 0.8);

    // brute-force oracle over all samples
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const Vec3 q = obj.location + Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                           rng.uniform(-0.2, 0.2));
        const auto got = closest_surface_point_and_normal(q, obj);
        double best = 1e30;
        for (int k = 0; k < DynamicObject::kNumPoints; ++k)
            best = std::min(best, (obj.posed_point(k) - q).norm());
        CHECK((got.point - q).norm() == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("closest surface point: box interior gives the face normal") {
    SceneModel s = empty_room();
    OrientedBox b;
    b.center = Vec3(0, 0, 0.5);
    b.half = Vec3(0.5, 0.5, 0.5);
    s.obstacles.push_back(b);
    const auto hit = closest_surface_point_and_normal(Vec3(0.45, 0.1, 0.5), s);
    CHECK(hit.normal.x() == doctest::Approx(1.0));
    CHECK(hit.normal.y() == doctest::Approx(0.0));
    CHECK(hit.point.x() == doctest::Approx(0.5));
}

TEST_CASE("flatten walkable: band semantics") {
    SceneModel s = empty_room();
    OrientedBox lamp;  // hangs above the band
    lamp.center = Vec3(1, 1, 2.2);
    lamp.half = Vec3(0.2, 0.2, 0.1);
    s.obstacles.push_back(lamp);
    OrientedBox crate;
    crate.center = Vec3(-1, -1, 0.4);
    crate.half = Vec3(0.2, 0.2, 0.4);
    s.obstacles.push_back(crate);

    const auto g = voxelize_scene(s, 0.1);
    const auto m = flatten_walkable(g, 0.1, 1.8);
    int occupied_cols = 0;
    bool lamp_col_occupied = false;
    for (int iy = 0; iy < m.ny; ++iy)
        for (int ix = 0; ix < m.nx; ++ix) {
            if (m.at(ix, iy)) ++occupied_cols;
            const double x = m.origin.x() + (ix + 0.5) * m.cell_size;
            const double y = m.origin.y() + (iy + 0.5) * m.cell_size;
            if (std::abs(x - 1) < 0.1 && std::abs(y - 1) < 0.1 && m.at(ix, iy))
                lamp_col_occupied = true;
        }
    CHECK(occupied_cols > 0);
    CHECK_FALSE(lamp_col_occupied);  // lamp above band leaves the column walkable

    const auto all_zero = flatten_walkable(voxelize_scene(empty_room(), 0.1), 0.1, 1.8);
    for (auto v : all_zero.occupancy) CHECK(v == 0);

    CHECK_THROWS(flatten_walkable(g, 1.0, 1.0));   // empty band
    CHECK_THROWS(flatten_walkable(g, 5.0, 6.0));   // outside vertical extent
}

TEST_CASE("scene json round trip") {
    Rng rng(3);
    auto s = cluttered_room(rng, 3);
    s.dynamic_objects["bottle"] = make_object_from_generator("cylinder:0.04:0.22");
    s.dynamic_objects["bottle"].location = Vec3(0.5, 0.5, 1.0);
    s.static_objects["sofa"] = StaticObject{Vec3(1, 1, 0.45), 0};

    const auto text = scene_to_json(s);
    const auto t = scene_from_json(text);
    CHECK(t.obstacles.size() == s.obstacles.size());
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
        CHECK((t.obstacles[i].center - s.obstacles[i].center).norm() < 1e-12);
        CHECK(t.obstacles[i].yaw == doctest::Approx(s.obstacles[i].yaw));
    }
    CHECK(t.dynamic_objects.count("bottle") == 1);
    CHECK((t.dynamic_objects.at("bottle").location - Vec3(0.5, 0.5, 1.0)).norm() < 1e-12);
    CHECK((t.dynamic_objects.at("bottle").points - s.dynamic_objects.at("bottle").points).norm() <
          1e-12);
    CHECK(t.static_objects.at("sofa").obstacle_index == 0);

    // unsupported version rejected
    auto j = nlohmann::json::parse(text);
    j["format_version"] = 999;
    CHECK_THROWS(scene_from_json(j.dump()));
}

TEST_CASE("object generators: unit normals and exact point counts") {
    for (const auto* tag : {"cylinder:0.04:0.22", "sphere:0.05"}) {
        const auto o = make_object_from_generator(tag);
        for (int i = 0; i < DynamicObject::kNumPoints; ++i) {
            CHECK(std::abs(o.normals.row(i).norm() - 1.0) < 1e-6);
        }
    }
    CHECK_THROWS(make_object_from_generator("torus:1:2"));
}
