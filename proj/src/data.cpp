#include "scenemotion/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "scenemotion/container.hpp"

namespace scenemotion {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Scene generation

namespace {

struct HeightClass {
    double lo, hi;
};

OrientedBox inflate_footprint(const OrientedBox& b, double margin) {
    OrientedBox out = b;
    out.half.x() += margin;
    out.half.y() += margin;
    return out;
}

}  // namespace

double clearance_for_height(double obstacle_height) {
    // taller furniture gets a wider berth in the recorded paths
    const double h = std::clamp(obstacle_height, 0.0, 1.8);
    return 0.16 + 0.26 * h / 1.8;
}

SceneModel generate_scene(const SyntheticSceneSpec& spec, Rng& rng) {
    SceneModel s;
    const double size = rng.uniform(spec.room_min, spec.room_max);
    s.bounds.min = Vec3(-size / 2, -size / 2, 0.0);
    s.bounds.max = Vec3(size / 2, size / 2, 2.6);
    s.floor_height = 0.0;

    const int target = rng.uniform_int(spec.obstacles_min, spec.obstacles_max);
    const HeightClass classes[3] = {{0.35, 0.55}, {0.70, 1.10}, {1.50, 2.10}};

    // keep a passage margin so rooms stay traversable
    const double wall_margin = 0.9;
    const double gap = 0.78;
    bool layout_done = false;
    for (int restart = 0; restart < 20 && !layout_done; ++restart) {
        s.obstacles.clear();
        int placed = 0;
        int attempts = 0;
        while (placed < target && attempts < spec.max_retries * target) {
            ++attempts;
            const int cls = rng.uniform_int(0, 2);
            OrientedBox b;
            const double h = rng.uniform(classes[cls].lo, classes[cls].hi);
            b.half = Vec3(rng.uniform(0.2, 0.45), rng.uniform(0.2, 0.45), h / 2);
            b.center =
                Vec3(rng.uniform(s.bounds.min.x() + wall_margin, s.bounds.max.x() - wall_margin),
                     rng.uniform(s.bounds.min.y() + wall_margin, s.bounds.max.y() - wall_margin),
                     h / 2);
            b.yaw = rng.bernoulli(0.5) ? 0.0 : rng.uniform(-kPi, kPi);

            bool ok = true;
            for (const auto& other : s.obstacles)
                if (inflate_footprint(b, gap / 2)
                        .footprint_overlaps(inflate_footprint(other, gap / 2)))
                    ok = false;
            if (!ok) continue;
            s.obstacles.push_back(b);
            ++placed;
        }
        layout_done = placed == target;
    }
    if (!layout_done) throw std::runtime_error("generate_scene: could not place obstacles");

    if (spec.with_objects && !s.obstacles.empty()) {
        // seat: re-purpose the first low/mid obstacle, or add one
        int seat_idx = -1;
        for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
            const double top = s.obstacles[i].center.z() + s.obstacles[i].half.z();
            if (top > 0.38 && top < 0.56) {
                seat_idx = static_cast<int>(i);
                break;
            }
        }
        if (seat_idx < 0) {
            // lower the first obstacle into a seat
            auto& b = s.obstacles[0];
            const double h = rng.uniform(0.42, 0.5);
            b.center.z() = h / 2;
            b.half.z() = h / 2;
            seat_idx = 0;
        }
        const auto& seat = s.obstacles[seat_idx];
        s.static_objects["sofa"] =
            StaticObject{seat.center + Vec3(0, 0, seat.half.z()), seat_idx};

        // table with a bottle on top
        int table_idx = -1;
        for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
            const double top = s.obstacles[i].center.z() + s.obstacles[i].half.z();
            if (static_cast<int>(i) != seat_idx && top > 0.68 && top < 0.95) {
                table_idx = static_cast<int>(i);
                break;
            }
        }
        if (table_idx < 0) {
            for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
                if (static_cast<int>(i) == seat_idx) continue;
                auto& b = s.obstacles[i];
                const double h = rng.uniform(0.72, 0.8);
                b.center.z() = h / 2;
                b.half.z() = h / 2;
                table_idx = static_cast<int>(i);
                break;
            }
        }
        if (table_idx >= 0) {
            const auto& table = s.obstacles[table_idx];
            s.static_objects["table"] =
                StaticObject{table.center + Vec3(0, 0, table.half.z()), table_idx};
            DynamicObject bottle = make_object_from_generator("cylinder:0.035:0.22");
            const Vec3 local(rng.uniform(-0.5, 0.5) * table.half.x(),
                             rng.uniform(-0.5, 0.5) * table.half.y(),
                             table.half.z() + 0.11);
            bottle.location = table.to_world(local);
            s.dynamic_objects["bottle"] = bottle;
        }
    }
    s.validate();
    return s;
}

SceneModel mirror_scene(const SceneModel& scene) {
    SceneModel out = scene;
    out.bounds.min.x() = -scene.bounds.max.x();
    out.bounds.max.x() = -scene.bounds.min.x();
    for (auto& b : out.obstacles) {
        b.center.x() = -b.center.x();
        b.yaw = -b.yaw;
    }
    for (auto& [id, o] : out.dynamic_objects) o.location.x() = -o.location.x();
    for (auto& [id, o] : out.static_objects) o.location.x() = -o.location.x();
    return out;
}

WalkableMap inflated_walkable_map(const SceneModel& scene, double cell_size) {
    WalkableMap m;
    m.cell_size = cell_size;
    m.origin = Vec2(scene.bounds.min.x(), scene.bounds.min.y());
    m.nx = std::max(1, static_cast<int>(std::ceil(scene.bounds.extent().x() / cell_size - 1e-9)));
    m.ny = std::max(1, static_cast<int>(std::ceil(scene.bounds.extent().y() / cell_size - 1e-9)));
    m.occupancy.assign(static_cast<std::size_t>(m.nx) * m.ny, 0);
    std::vector<OrientedBox> inflated;
    for (const auto& b : scene.obstacles)
        inflated.push_back(inflate_footprint(b, clearance_for_height(2 * b.half.z())));
    for (int iy = 0; iy < m.ny; ++iy)
        for (int ix = 0; ix < m.nx; ++ix) {
            const Vec2 c = m.origin + cell_size * Vec2(ix + 0.5, iy + 0.5);
            for (const auto& b : inflated) {
                const Vec3 p(c.x(), c.y(), b.center.z());
                if (b.contains(p)) {
                    m.at(ix, iy) = 1;
                    break;
                }
            }
        }
    return m;
}

// ---------------------------------------------------------------------------
// Path planning (greedy sub-goal walk)

std::vector<Vec2> plan_walk_path(const WalkableMap& map, const Vec2& start, const Vec2& goal,
                                 double ring_radius, double arrive_eps) {
    std::vector<Vec2> path{start};
    Vec2 pos = start;
    for (int iter = 0; iter < 400; ++iter) {
        const double dist = (goal - pos).norm();
        if (dist <= arrive_eps) return path;
        if (dist <= ring_radius && is_walkable_segment(map, pos, goal)) {
            path.push_back(goal);
            return path;
        }
        const double want = std::atan2(goal.y() - pos.y(), goal.x() - pos.x());
        bool found = false;
        Vec2 best;
        for (double radius : {ring_radius, ring_radius * 0.5}) {
            double best_off = 1e9;
            for (int k = 0; k < 72; ++k) {
                // candidates ordered by |angle offset|, positive side first
                const double off = (k % 2 == 0 ? 1 : -1) * kPi * ((k / 2) * 5.0) / 180.0;
                const Vec2 cand = pos + radius * Vec2(std::cos(want + off), std::sin(want + off));
                if (!map.in_bounds(cand)) continue;
                if (!is_walkable_segment(map, pos, cand)) continue;
                if (std::abs(off) < best_off) {
                    best_off = std::abs(off);
                    best = cand;
                    found = true;
                }
            }
            if (found) break;
        }
        if (!found) throw std::runtime_error("plan_walk_path: blocked");
        pos = best;
        path.push_back(pos);
    }
    throw std::runtime_error("plan_walk_path: no progress toward goal");
}

// ---------------------------------------------------------------------------
// Motion taxonomy

const char* motion_type_name(MotionType t) {
    switch (t) {
        case MotionType::kWalkForward: return "walk_forward";
        case MotionType::kWalkBack: return "walk_back";
        case MotionType::kWalkLeft: return "walk_left";
        case MotionType::kWalkRight: return "walk_right";
        case MotionType::kTurnLeft: return "turn_left";
        case MotionType::kTurnRight: return "turn_right";
        case MotionType::kPickUp: return "pick_up";
        case MotionType::kPutDown: return "put_down";
        case MotionType::kSitDown: return "sit_down";
        case MotionType::kStandUp: return "stand_up";
        case MotionType::kDrink: return "drink";
        case MotionType::kStandStill: return "stand_still";
    }
    return "unknown";
}

MotionType motion_type_from_name(const std::string& name) {
    for (MotionType t : supported_motion_types())
        if (name == motion_type_name(t)) return t;
    throw std::runtime_error("unknown motion type: " + name);
}

StageType stage_for_motion(MotionType t) {
    switch (t) {
        case MotionType::kWalkForward:
        case MotionType::kWalkBack:
        case MotionType::kWalkLeft:
        case MotionType::kWalkRight:
        case MotionType::kTurnLeft:
        case MotionType::kTurnRight: return StageType::kLocomotion;
        case MotionType::kPickUp: return StageType::kGrasp;
        case MotionType::kPutDown: return StageType::kPutDown;
        case MotionType::kSitDown:
        case MotionType::kStandUp: return StageType::kSceneObjectInteraction;
        case MotionType::kDrink: return StageType::kSmallObjectInteraction;
        case MotionType::kStandStill: return StageType::kStationary;
    }
    return StageType::kStationary;
}

bool is_locomotion(MotionType t) { return stage_for_motion(t) == StageType::kLocomotion; }

std::vector<MotionType> supported_motion_types() {
    return {MotionType::kWalkForward, MotionType::kWalkBack,  MotionType::kWalkLeft,
            MotionType::kWalkRight,   MotionType::kTurnLeft,  MotionType::kTurnRight,
            MotionType::kPickUp,      MotionType::kPutDown,   MotionType::kSitDown,
            MotionType::kStandUp,     MotionType::kDrink,     MotionType::kStandStill};
}

// ---------------------------------------------------------------------------
// Annotation templates (>= 5 paraphrases per type)

namespace {

const std::map<MotionType, std::vector<std::string>>& template_bank() {
    static const std::map<MotionType, std::vector<std::string>> bank = {
        {MotionType::kWalkForward,
         {"walk forward", "walk straight ahead", "move forward", "go straight toward the target",
          "head forward across the room", "walk ahead"}},
        {MotionType::kWalkBack,
         {"walk backward", "step backwards", "move back without turning", "back up slowly",
          "walk in reverse", "retreat a few steps"}},
        {MotionType::kWalkLeft,
         {"walk to the left", "sidestep left", "move left while facing forward",
          "strafe to the left side", "shuffle left across the room"}},
        {MotionType::kWalkRight,
         {"walk to the right", "sidestep right", "move right while facing forward",
          "strafe to the right side", "shuffle right across the room"}},
        {MotionType::kTurnLeft,
         {"turn left", "turn to the left", "rotate left in place", "pivot to the left",
          "swivel left"}},
        {MotionType::kTurnRight,
         {"turn right", "turn to the right", "rotate right in place", "pivot to the right",
          "swivel right"}},
        {MotionType::kPickUp,
         {"pick up the bottle with the right hand", "grab the bottle with the right hand",
          "reach out and pick up the bottle", "take the bottle from the table",
          "lift the bottle with the right hand", "reach for the bottle"}},
        {MotionType::kPutDown,
         {"put down the bottle with the right hand", "place the bottle on the table",
          "set the bottle down", "put the bottle back on the table",
          "lower the bottle onto the table"}},
        {MotionType::kSitDown,
         {"sit down on the sofa", "take a seat on the sofa", "lower yourself onto the sofa",
          "sit on the sofa", "settle down on the sofa"}},
        {MotionType::kStandUp,
         {"stand up from the sofa", "get up from the sofa", "rise from the sofa",
          "stand up straight from the seat", "get off the sofa"}},
        {MotionType::kDrink,
         {"drink water from the bottle", "take a sip from the bottle",
          "drink from the bottle in the right hand", "raise the bottle and drink",
          "have a drink of water"}},
        {MotionType::kStandStill,
         {"stand still", "stay in place", "hold the current position", "stand and wait",
          "remain standing still"}},
    };
    return bank;
}

std::string pick_template(MotionType t, Rng& rng) {
    const auto& v = template_bank().at(t);
    return v[rng.uniform_int(0, static_cast<int>(v.size()) - 1)];
}

std::string swap_left_right(const std::string& text) {
    // token-wise swap of "left" and "right"
    std::string out;
    std::string cur;
    auto flush = [&] {
        if (cur == "left")
            out += "right";
        else if (cur == "right")
            out += "left";
        else
            out += cur;
        cur.clear();
    };
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else {
            flush();
            out.push_back(c);
        }
    }
    flush();
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pose composition helpers

namespace {

using JointOffsets = std::array<Vec3, Skeleton::kNumJoints>;

JointOffsets rest_offsets() {
    JointOffsets o;
    const auto& sk = Skeleton::instance();
    for (int j = 0; j < Skeleton::kNumJoints; ++j) o[j] = sk.rest_offsets[j];
    return o;
}

// frame[j] = ground + R(yaw) * local[j]
void write_frame(FrameMatrix& frames, int row, const Vec2& ground, double yaw,
                 const JointOffsets& local) {
    for (int j = 0; j < Skeleton::kNumJoints; ++j) {
        const Vec2 xy = rotate2(Vec2(local[j].x(), local[j].y()), yaw);
        frames(row, j * 3) = ground.x() + xy.x();
        frames(row, j * 3 + 1) = ground.y() + xy.y();
        frames(row, j * 3 + 2) = local[j].z();
    }
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3 - 2 * t);
}

// minimum-jerk style ease for reach trajectories
double ease(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (t * 6 - 15) + 10);
}

Vec3 to_local(const Vec2& ground, double yaw, const Vec3& world) {
    const Vec2 d(world.x() - ground.x(), world.y() - ground.y());
    const Vec2 xy = rotate2(d, -yaw);
    return Vec3(xy.x(), xy.y(), world.z());
}

}  // namespace

Vec2 sample_standing_position(const SceneModel& scene, Rng& rng, double clearance) {
    const double m = 0.5;
    for (int i = 0; i < 300; ++i) {
        const Vec2 p(rng.uniform(scene.bounds.min.x() + m, scene.bounds.max.x() - m),
                     rng.uniform(scene.bounds.min.y() + m, scene.bounds.max.y() - m));
        bool ok = true;
        for (const auto& b : scene.obstacles) {
            const double d = b.surface_distance(Vec3(p.x(), p.y(), b.center.z()));
            const bool inside = b.contains(Vec3(p.x(), p.y(), b.center.z()));
            if (inside || d < clearance) {
                ok = false;
                break;
            }
        }
        if (ok) return p;
    }
    throw std::runtime_error("sample_standing_position: no free spot found");
}

namespace {

Vec2 sample_free_position(const SceneModel& scene, Rng& rng, double clearance) {
    return sample_standing_position(scene, rng, clearance);
}

// ---------------------------------------------------------------------------
// Gait synthesis: pelvis path with anchored feet.

struct GaitTrack {
    std::vector<Vec2> ground;   // pelvis ground position per frame
    std::vector<double> yaw;    // body yaw per frame
    std::vector<double> speed;  // m/s per frame
};

// Trapezoid speed profile along a polyline path.
GaitTrack follow_path(const std::vector<Vec2>& path, double cruise, double yaw_offset) {
    std::vector<double> seg_len;
    double total = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        seg_len.push_back((path[i] - path[i - 1]).norm());
        total += seg_len.back();
    }
    const double accel = 1.2;
    const double dt = 1.0 / kFps;

    GaitTrack g;
    double s = 0, v = 0;
    auto point_at = [&](double arc) {
        double acc = 0;
        for (std::size_t i = 0; i < seg_len.size(); ++i) {
            if (arc <= acc + seg_len[i] || i + 1 == seg_len.size()) {
                const double t = seg_len[i] > 1e-12 ? (arc - acc) / seg_len[i] : 0.0;
                return std::pair<Vec2, Vec2>(path[i] + std::clamp(t, 0.0, 1.0) * (path[i + 1] - path[i]),
                                             (path[i + 1] - path[i]).normalized());
            }
            acc += seg_len[i];
        }
        return std::pair<Vec2, Vec2>(path.back(), Vec2(0, 1));
    };

    double prev_yaw = 0;
    bool first = true;
    while (s < total - 1e-6) {
        const double remaining = total - s;
        const double v_cap = std::min(cruise, std::sqrt(2 * accel * std::max(0.0, remaining)));
        v = std::min(v_cap, v + accel * dt);
        v = std::max(v, 0.08);
        s = std::min(total, s + v * dt);
        const auto [p, tangent] = point_at(s);
        double yaw = std::atan2(-tangent.x(), tangent.y()) + yaw_offset;
        if (!first) {
            // low-pass the yaw for smooth turns
            const double d = wrap_angle(yaw - prev_yaw);
            yaw = prev_yaw + std::clamp(d, -0.12, 0.12);
        }
        first = false;
        prev_yaw = yaw;
        g.ground.push_back(p);
        g.yaw.push_back(wrap_angle(yaw));
        g.speed.push_back(v);
        if (static_cast<int>(g.ground.size()) > 12 * kFps) break;  // clip cap
    }
    return g;
}

// Full-body frames over a pelvis track. Feet are anchored during stance and
// swing between anchors, which keeps the reference foot sliding low.
FrameMatrix synthesize_walk(const GaitTrack& track, double settle_frames = 8) {
    const auto& sk = Skeleton::instance();
    const int lead = 6;  // standing lead-in frames
    const int n = static_cast<int>(track.ground.size());
    const int total = lead + n + static_cast<int>(settle_frames);
    FrameMatrix frames(total, kMotionDim);

    auto track_ground = [&](int i) {
        return track.ground[std::clamp(i, 0, n - 1)];
    };
    auto track_yaw = [&](int i) { return track.yaw[std::clamp(i, 0, n - 1)]; };
    auto track_speed = [&](int i) {
        if (i < 0 || i >= n) return 0.0;
        return track.speed[i];
    };

    // gait phase
    std::vector<double> phase(total, 0.0);
    double ph = 0;
    for (int f = 0; f < total; ++f) {
        const double v = track_speed(f - lead);
        const double cycle_freq = std::clamp(v / 0.62, 0.0, 2.1);  // cycles per second
        ph += 2 * kPi * cycle_freq / kFps;
        phase[f] = ph;
    }

    // feet: stance anchors with timed swings
    struct Foot {
        int ankle, toe;
        double lateral;   // local x of the ankle
        double phase_off;
        Vec2 anchor;      // world ground position of the ankle
        double anchor_yaw = 0;  // toe direction frozen per step
        Vec2 from;        // swing start
        double from_yaw = 0;
        bool swinging = false;
        double swing_start_phase = 0;
    };
    const double kSwingLen = 0.38 * 2 * kPi;  // swing portion of a cycle
    Foot feet[2] = {
        {sk.left_ankle, sk.left_foot, sk.rest_offsets[sk.left_ankle].x(), 0.0, Vec2(), 0, Vec2(), 0, false, 0},
        {sk.right_ankle, sk.right_foot, sk.rest_offsets[sk.right_ankle].x(), kPi, Vec2(), 0, Vec2(), 0, false, 0},
    };
    for (auto& ft : feet) {
        const Vec2 off = rotate2(Vec2(ft.lateral, 0.0), track_yaw(0));
        ft.anchor = track_ground(-lead) + off;
        ft.anchor_yaw = track_yaw(0);
    }

    for (int f = 0; f < total; ++f) {
        const int i = f - lead;
        const Vec2 ground = track_ground(i);
        const double yaw = track_yaw(i);
        const double v = track_speed(i);

        JointOffsets local = rest_offsets();
        // pelvis bob and sway
        const double bob = 0.018 * std::min(1.0, v) * std::sin(2 * phase[f]);
        const double sway = 0.013 * std::min(1.0, v) * std::sin(phase[f]);
        for (int j : {0, 1, 2, 3, 6, 9, 12, 13, 14, 15, 16, 17, 26, 27}) {
            local[j].z() += bob;
            local[j].x() += sway;
        }
        // arm swing opposite to the same-side leg
        const double arm = 0.10 * std::min(1.0, v);
        const double ls = std::sin(phase[f] + kPi), rs = std::sin(phase[f]);
        local[18].y() += 0.4 * arm * ls;
        local[20].y() += arm * ls;
        local[22].y() += arm * ls;
        local[23].y() += arm * ls;
        local[19].y() += 0.4 * arm * rs;
        local[21].y() += arm * rs;
        local[24].y() += arm * rs;
        local[25].y() += arm * rs;

        write_frame(frames, f, ground, yaw, local);

        // feet override
        for (auto& ft : feet) {
            const double cyc = std::fmod(phase[f] + ft.phase_off, 2 * kPi);
            const bool want_swing = v > 0.02 && cyc < kSwingLen;
            if (want_swing && !ft.swinging) {
                ft.swinging = true;
                ft.from = ft.anchor;
                ft.from_yaw = ft.anchor_yaw;
                ft.swing_start_phase = phase[f];
                // land where the hip will be half a cycle from now
                const int look = static_cast<int>(kFps * 0.30 / std::max(0.2, v / 0.62));
                const Vec2 off = rotate2(Vec2(ft.lateral, 0.06), track_yaw(i + look));
                ft.anchor = track_ground(i + look) + off;
                ft.anchor_yaw = track_yaw(i + look);
            }
            double lift = 0.0;
            Vec2 foot_pos = ft.anchor;
            double foot_yaw = ft.anchor_yaw;
            if (ft.swinging) {
                const double progress =
                    std::clamp((phase[f] - ft.swing_start_phase) / kSwingLen, 0.0, 1.0);
                foot_pos = ft.from + smoothstep(progress) * (ft.anchor - ft.from);
                foot_yaw = ft.from_yaw +
                           smoothstep(progress) * wrap_angle(ft.anchor_yaw - ft.from_yaw);
                lift = 0.06 * std::sin(kPi * progress) * std::min(1.0, v + 0.3);
                if (progress >= 1.0 || !want_swing) ft.swinging = false;
            }
            const double za = sk.rest_offsets[ft.ankle].z();
            const double zt = sk.rest_offsets[ft.toe].z();
            frames(f, ft.ankle * 3) = foot_pos.x();
            frames(f, ft.ankle * 3 + 1) = foot_pos.y();
            frames(f, ft.ankle * 3 + 2) = za + lift;
            const Vec2 toe_off = rotate2(Vec2(0.0, 0.13), foot_yaw);
            frames(f, ft.toe * 3) = foot_pos.x() + toe_off.x();
            frames(f, ft.toe * 3 + 1) = foot_pos.y() + toe_off.y();
            frames(f, ft.toe * 3 + 2) = zt + lift;

            // knee follows hip/ankle midpoint with a forward bow
            const int hip = ft.ankle == sk.left_ankle ? sk.left_hip : sk.right_hip;
            const int knee = ft.ankle == sk.left_ankle ? 4 : 5;
            const Vec3 hip_p(frames(f, hip * 3), frames(f, hip * 3 + 1), frames(f, hip * 3 + 2));
            const Vec3 ank_p(frames(f, ft.ankle * 3), frames(f, ft.ankle * 3 + 1),
                             frames(f, ft.ankle * 3 + 2));
            const Vec2 fwd = rotate2(Vec2(0, 1), yaw);
            const double bend = 0.05 + 0.7 * lift;
            Vec3 knee_p = 0.5 * (hip_p + ank_p);
            knee_p.x() += bend * fwd.x();
            knee_p.y() += bend * fwd.y();
            frames(f, knee * 3) = knee_p.x();
            frames(f, knee * 3 + 1) = knee_p.y();
            frames(f, knee * 3 + 2) = knee_p.z();
        }
    }
    return frames;
}

// Standing pose sequence with optional per-frame modifiers.
FrameMatrix standing_frames(int count, const Vec2& ground, double yaw,
                            const std::function<void(int, JointOffsets&)>& modify) {
    FrameMatrix frames(count, kMotionDim);
    for (int f = 0; f < count; ++f) {
        JointOffsets local = rest_offsets();
        // breathing
        const double br = 0.003 * std::sin(2 * kPi * 0.3 * f / kFps);
        for (int j : {3, 6, 9, 12, 15, 26, 27}) local[j].z() += br;
        if (modify) modify(f, local);
        write_frame(frames, f, ground, yaw, local);
    }
    return frames;
}

// Right arm to a local-frame target with the index tip landing exactly on it.
void aim_right_arm(JointOffsets& local, const Vec3& target_local, double blend) {
    const auto& sk = Skeleton::instance();
    const Vec3 shoulder = local[17];
    const Vec3 rest_index = local[24];
    const Vec3 index = rest_index + ease(blend) * (target_local - rest_index);
    Vec3 dir = index - shoulder;
    const double n = dir.norm();
    dir = n > 1e-9 ? Vec3(dir / n) : Vec3(0, 1, 0);
    const Vec3 wrist = index - 0.11 * dir;
    Vec3 lateral = dir.cross(Vec3(0, 0, 1));
    if (lateral.norm() < 1e-6) lateral = Vec3(1, 0, 0);
    lateral.normalize();
    const Vec3 middle = index + 0.02 * lateral - 0.01 * dir;
    // elbow bows outward-down, straightening as the arm extends
    const double reach = std::min(1.0, (index - shoulder).norm() / 0.55);
    Vec3 elbow = shoulder + 0.5 * (wrist - shoulder);
    elbow += (1.0 - 0.85 * reach) * Vec3(0.10, -0.02, -0.12);
    local[19] = elbow;
    local[21] = wrist;
    local[24] = index;
    local[25] = middle;
}

const Vec3 kCarryWrist(0.18, 0.16, 0.98);
const Vec3 kCarryIndex(0.19, 0.26, 0.96);

void carry_pose(JointOffsets& local, double blend) {
    aim_right_arm(local, kCarryIndex, blend);
}

}  // namespace

// ---------------------------------------------------------------------------
// Clip generators

namespace {

LabeledClip make_walk_clip(MotionType type, const SceneModel& scene, Rng& rng) {
    const WalkableMap inflated = inflated_walkable_map(scene);
    const double clearance = 0.35;
    for (int attempt = 0; attempt < 30; ++attempt) {
        try {
            const Vec2 start = sample_free_position(scene, rng, clearance);
            const double dist = rng.uniform(1.6, 3.6);
            const double ang = rng.uniform(-kPi, kPi);
            Vec2 goal = start + dist * Vec2(std::cos(ang), std::sin(ang));
            if (!inflated.in_bounds(goal)) continue;
            bool free_goal = true;
            for (const auto& b : scene.obstacles)
                if (b.contains(Vec3(goal.x(), goal.y(), b.center.z()))) free_goal = false;
            if (!free_goal) continue;

            const auto path = plan_walk_path(inflated, start, goal, 0.55, 0.12);
            double yaw_offset = 0.0;
            if (type == MotionType::kWalkBack) yaw_offset = kPi;
            if (type == MotionType::kWalkLeft) yaw_offset = -kPi / 2;
            if (type == MotionType::kWalkRight) yaw_offset = kPi / 2;
            const double cruise = rng.uniform(0.8, 1.25);
            const auto track = follow_path(path, cruise, yaw_offset);
            if (static_cast<int>(track.ground.size()) < kFps) continue;

            LabeledClip clip;
            clip.positions = synthesize_walk(track);
            if (clip.frames() > 12 * kFps) continue;
            clip.type = type;
            clip.text = pick_template(type, rng);
            clip.goal = Vec3(goal.x(), goal.y(), 0.95);
            return clip;
        } catch (const std::runtime_error&) {
            continue;
        }
    }
    throw std::runtime_error("make_walk_clip: unreachable goal");
}

LabeledClip make_turn_clip(MotionType type, const SceneModel& scene, Rng& rng) {
    const Vec2 pos = sample_free_position(scene, rng, 0.5);
    const double yaw0 = rng.uniform(-kPi, kPi);
    const double sweep = rng.uniform(kPi / 3, 2 * kPi / 3) *
                         (type == MotionType::kTurnLeft ? 1.0 : -1.0);
    const int turn_frames = static_cast<int>(rng.uniform(1.4, 2.4) * kFps);
    const int hold = 12;
    const int total = turn_frames + hold;

    FrameMatrix frames(total, kMotionDim);
    const auto& sk = Skeleton::instance();
    // feet shuffle: re-anchor every ~0.45s
    struct FootAnchor {
        Vec2 pos;
        double yaw;
    };
    FootAnchor anchors[2];
    for (int side = 0; side < 2; ++side) {
        const double lx = side == 0 ? sk.rest_offsets[sk.left_ankle].x()
                                    : sk.rest_offsets[sk.right_ankle].x();
        anchors[side] = {pos + rotate2(Vec2(lx, 0), yaw0), yaw0};
    }
    for (int f = 0; f < total; ++f) {
        const double t = std::min(1.0, static_cast<double>(f) / turn_frames);
        const double yaw = wrap_angle(yaw0 + sweep * smoothstep(t));
        JointOffsets local = rest_offsets();
        write_frame(frames, f, pos, yaw, local);

        const int step_period = static_cast<int>(0.45 * kFps);
        for (int side = 0; side < 2; ++side) {
            const int ankle = side == 0 ? sk.left_ankle : sk.right_ankle;
            const int toe = side == 0 ? sk.left_foot : sk.right_foot;
            const double lx = sk.rest_offsets[ankle].x();
            const int beat = (f + side * step_period / 2) % step_period;
            double lift = 0;
            if (f < turn_frames && beat < step_period / 3) {
                const double p = 3.0 * beat / step_period;
                const FootAnchor target{pos + rotate2(Vec2(lx, 0), yaw), yaw};
                anchors[side].pos = anchors[side].pos + smoothstep(p) * (target.pos - anchors[side].pos);
                anchors[side].yaw = yaw;
                lift = 0.03 * std::sin(kPi * p);
            }
            frames(f, ankle * 3) = anchors[side].pos.x();
            frames(f, ankle * 3 + 1) = anchors[side].pos.y();
            frames(f, ankle * 3 + 2) = sk.rest_offsets[ankle].z() + lift;
            const Vec2 toe_off = rotate2(Vec2(0, 0.13), anchors[side].yaw);
            frames(f, toe * 3) = anchors[side].pos.x() + toe_off.x();
            frames(f, toe * 3 + 1) = anchors[side].pos.y() + toe_off.y();
            frames(f, toe * 3 + 2) = sk.rest_offsets[toe].z() + lift;
        }
    }
    LabeledClip clip;
    clip.positions = frames;
    clip.type = type;
    clip.text = pick_template(type, rng);
    return clip;
}

// character standing near the object, right arm reaches the goal exactly
LabeledClip make_reach_clip(MotionType type, const SceneModel& scene, Rng& rng) {
    const bool put_down = type == MotionType::kPutDown;
    auto bottle_it = scene.dynamic_objects.find("bottle");
    if (bottle_it == scene.dynamic_objects.end())
        throw std::runtime_error("make_reach_clip: scene has no bottle");
    const Vec3 object_top = bottle_it->second.location + Vec3(0, 0, 0.11);

    Vec3 goal = object_top;
    if (put_down) {
        // release point near the original spot on the table
        goal += Vec3(rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), 0.0);
    }

    // stand at reachable distance, facing the goal
    Vec2 stand;
    bool found = false;
    for (int i = 0; i < 200 && !found; ++i) {
        const double d = rng.uniform(0.42, 0.68);
        const double a = rng.uniform(-kPi, kPi);
        stand = Vec2(goal.x(), goal.y()) + d * Vec2(std::cos(a), std::sin(a));
        bool ok = scene.bounds.contains(Vec3(stand.x(), stand.y(), 1.0));
        for (const auto& b : scene.obstacles) {
            const Vec3 p(stand.x(), stand.y(), b.center.z());
            if (b.contains(p) || b.surface_distance(p) < 0.18) ok = false;
        }
        found = ok;
    }
    if (!found) throw std::runtime_error("make_reach_clip: no standing spot near object");
    const double yaw = std::atan2(-(goal.x() - stand.x()), goal.y() - stand.y());

    const int lead = static_cast<int>(rng.uniform(0.3, 0.6) * kFps);
    const int reach = static_cast<int>(rng.uniform(0.9, 1.4) * kFps);
    const int hold = static_cast<int>(rng.uniform(0.5, 0.9) * kFps);
    const int total = lead + reach + hold;

    const Vec3 goal_local = to_local(stand, yaw, goal);
    // crouch when the target sits low
    const double crouch = std::max(0.0, 0.62 - goal.z()) * 0.7;

    FrameMatrix frames = standing_frames(total, stand, yaw, [&](int f, JointOffsets& local) {
        double blend = 0.0;
        if (f >= lead) blend = std::min(1.0, static_cast<double>(f - lead) / reach);
        if (put_down) {
            // start from the carry pose, travel to the release point
            JointOffsets tmp = local;
            carry_pose(tmp, 1.0);
            const Vec3 carry_index = tmp[24];
            const Vec3 index = carry_index + ease(blend) * (goal_local - carry_index);
            aim_right_arm(local, index, 1.0);
        } else {
            aim_right_arm(local, goal_local, blend);
        }
        const double dz = crouch * ease(blend);
        for (auto& p : local) p.z() -= dz * (p.z() / 0.95);
    });

    LabeledClip clip;
    clip.positions = frames;
    clip.type = type;
    clip.text = pick_template(type, rng);
    clip.goal = goal;
    clip.object_id = "bottle";
    return clip;
}

LabeledClip make_sit_clip(MotionType type, const SceneModel& scene, Rng& rng) {
    auto it = scene.static_objects.find("sofa");
    if (it == scene.static_objects.end()) throw std::runtime_error("make_sit_clip: no sofa");
    const Vec3 seat = it->second.location;
    const auto& box = scene.obstacles[it->second.obstacle_index];

    // approach side: face away from the seat, pelvis drops backwards onto it
    const double side_yaw = rng.uniform(-kPi, kPi);
    const Vec2 front_dir(std::cos(side_yaw), std::sin(side_yaw));
    const double front_off = std::max(box.half.x(), box.half.y()) + 0.18;
    const Vec2 stand_xy = Vec2(seat.x(), seat.y()) + front_off * front_dir;
    if (!scene.bounds.contains(Vec3(stand_xy.x(), stand_xy.y(), 1.0)))
        throw std::runtime_error("make_sit_clip: seat against the wall");
    // facing away from the seat
    const double yaw = std::atan2(-front_dir.x(), front_dir.y());

    const bool reverse = type == MotionType::kStandUp;
    const int lead = static_cast<int>(rng.uniform(0.3, 0.5) * kFps);
    const int move = static_cast<int>(rng.uniform(1.0, 1.6) * kFps);
    const int hold = static_cast<int>(rng.uniform(0.5, 0.9) * kFps);
    const int total = lead + move + hold;

    const double seat_height = seat.z() + 0.05;
    const Vec2 seat_xy(seat.x(), seat.y());
    const auto& sk = Skeleton::instance();

    FrameMatrix frames(total, kMotionDim);
    for (int f = 0; f < total; ++f) {
        double t = f < lead ? 0.0 : std::min(1.0, static_cast<double>(f - lead) / move);
        if (reverse) t = 1.0 - t;
        const double blend = smoothstep(t);

        const Vec2 ground = stand_xy + blend * (seat_xy - stand_xy);
        const double drop = blend * (0.95 - seat_height);

        JointOffsets local = rest_offsets();
        for (int j : {0, 1, 2, 3, 6, 9, 12, 13, 14, 15, 16, 17, 26, 27}) local[j].z() -= drop;
        // lean forward while moving
        const double lean = 0.12 * std::sin(kPi * blend);
        for (int j : {3, 6, 9, 12, 15, 26, 27}) local[j].y() += lean;
        // arms reach forward slightly for balance
        local[21].y() += 0.18 * blend;
        local[20].y() += 0.18 * blend;
        local[24].y() += 0.2 * blend;
        local[25].y() += 0.2 * blend;
        local[22].y() += 0.2 * blend;
        local[23].y() += 0.2 * blend;
        write_frame(frames, f, ground, yaw, local);

        // feet stay planted at the stand position
        for (int side = 0; side < 2; ++side) {
            const int ankle = side == 0 ? sk.left_ankle : sk.right_ankle;
            const int toe = side == 0 ? sk.left_foot : sk.right_foot;
            const double lx = sk.rest_offsets[ankle].x();
            const Vec2 a = stand_xy + rotate2(Vec2(lx, 0.02), yaw);
            frames(f, ankle * 3) = a.x();
            frames(f, ankle * 3 + 1) = a.y();
            frames(f, ankle * 3 + 2) = sk.rest_offsets[ankle].z();
            const Vec2 toe_off = rotate2(Vec2(0, 0.13), yaw);
            frames(f, toe * 3) = a.x() + toe_off.x();
            frames(f, toe * 3 + 1) = a.y() + toe_off.y();
            frames(f, toe * 3 + 2) = sk.rest_offsets[toe].z();
            // knees bend forward as the pelvis drops
            const int knee = side == 0 ? 4 : 5;
            const int hip = side == 0 ? sk.left_hip : sk.right_hip;
            const Vec3 hip_p(frames(f, hip * 3), frames(f, hip * 3 + 1), frames(f, hip * 3 + 2));
            const Vec3 ank_p(frames(f, ankle * 3), frames(f, ankle * 3 + 1),
                             frames(f, ankle * 3 + 2));
            const Vec2 fwd = rotate2(Vec2(0, 1), yaw);
            const double bend = 0.04 + 0.28 * blend;
            Vec3 knee_p = 0.5 * (hip_p + ank_p);
            knee_p.x() += bend * fwd.x();
            knee_p.y() += bend * fwd.y();
            frames(f, knee * 3) = knee_p.x();
            frames(f, knee * 3 + 1) = knee_p.y();
            frames(f, knee * 3 + 2) = knee_p.z();
        }
    }

    LabeledClip clip;
    clip.positions = frames;
    clip.type = type;
    clip.text = pick_template(type, rng);
    clip.goal = seat;
    clip.object_id = "sofa";
    return clip;
}

LabeledClip make_drink_clip(const SceneModel& scene, Rng& rng) {
    const Vec2 pos = sample_free_position(scene, rng, 0.4);
    const double yaw = rng.uniform(-kPi, kPi);
    const int lead = static_cast<int>(rng.uniform(0.3, 0.5) * kFps);
    const int raise = static_cast<int>(rng.uniform(0.7, 1.0) * kFps);
    const int sip = static_cast<int>(rng.uniform(0.8, 1.3) * kFps);
    const int lower = static_cast<int>(rng.uniform(0.7, 1.0) * kFps);
    const int total = lead + raise + sip + lower;

    const Vec3 mouth(0.02, 0.09, 1.48);

    FrameMatrix frames = standing_frames(total, pos, yaw, [&](int f, JointOffsets& local) {
        double blend;
        if (f < lead) {
            blend = 0.0;
        } else if (f < lead + raise) {
            blend = static_cast<double>(f - lead) / raise;
        } else if (f < lead + raise + sip) {
            blend = 1.0;
            // small tilt while sipping
            local[27].y() += 0.015;
            local[26].y() -= 0.01;
        } else {
            blend = 1.0 - static_cast<double>(f - lead - raise - sip) / lower;
        }
        JointOffsets tmp = local;
        carry_pose(tmp, 1.0);
        const Vec3 carry_index = tmp[24];
        const Vec3 index = carry_index + ease(blend) * (mouth - carry_index);
        aim_right_arm(local, index, 1.0);
    });

    LabeledClip clip;
    clip.positions = frames;
    clip.type = MotionType::kDrink;
    clip.text = pick_template(MotionType::kDrink, rng);
    clip.object_id = "bottle";
    return clip;
}

LabeledClip make_stand_still_clip(const SceneModel& scene, Rng& rng) {
    const Vec2 pos = sample_free_position(scene, rng, 0.4);
    const double yaw = rng.uniform(-kPi, kPi);
    const int total = static_cast<int>(rng.uniform(1.2, 2.8) * kFps);
    LabeledClip clip;
    clip.positions = standing_frames(total, pos, yaw, nullptr);
    clip.type = MotionType::kStandStill;
    clip.text = pick_template(MotionType::kStandStill, rng);
    return clip;
}

}  // namespace

LabeledClip generate_clip(MotionType type, const SceneModel& scene, Rng& rng) {
    LabeledClip clip;
    switch (type) {
        case MotionType::kWalkForward:
        case MotionType::kWalkBack:
        case MotionType::kWalkLeft:
        case MotionType::kWalkRight:
            clip = make_walk_clip(type, scene, rng);
            break;
        case MotionType::kTurnLeft:
        case MotionType::kTurnRight:
            clip = make_turn_clip(type, scene, rng);
            break;
        case MotionType::kPickUp:
        case MotionType::kPutDown:
            clip = make_reach_clip(type, scene, rng);
            break;
        case MotionType::kSitDown:
        case MotionType::kStandUp:
            clip = make_sit_clip(type, scene, rng);
            break;
        case MotionType::kDrink:
            clip = make_drink_clip(scene, rng);
            break;
        case MotionType::kStandStill:
            clip = make_stand_still_clip(scene, rng);
            break;
    }
    if (clip.frames() < kFps || clip.frames() > 12 * kFps)
        throw std::runtime_error("generate_clip: clip length outside 1..12 s");
    if (!clip.positions.allFinite()) throw std::runtime_error("generate_clip: non-finite output");
    return clip;
}

LabeledClip mirror_clip(const LabeledClip& clip) {
    LabeledClip out = clip;
    MotionSegment seg;
    seg.positions = clip.positions;
    out.positions = mirror(seg).positions;
    out.text = swap_left_right(clip.text);
    if (out.goal) out.goal->x() = -out.goal->x();
    out.mirrored = !clip.mirrored;
    // walk-left mirrors to walk-right and vice versa; turns likewise
    switch (clip.type) {
        case MotionType::kWalkLeft: out.type = MotionType::kWalkRight; break;
        case MotionType::kWalkRight: out.type = MotionType::kWalkLeft; break;
        case MotionType::kTurnLeft: out.type = MotionType::kTurnRight; break;
        case MotionType::kTurnRight: out.type = MotionType::kTurnLeft; break;
        default: break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Clip I/O

void save_clip(const LabeledClip& clip, const std::string& path) {
    ArrayContainer c;
    const int n = clip.frames();
    std::vector<float> pos(static_cast<std::size_t>(n) * kMotionDim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kMotionDim; ++j)
            pos[static_cast<std::size_t>(i) * kMotionDim + j] = static_cast<float>(clip.positions(i, j));
    c.put_f4("positions", pos, {n, Skeleton::kNumJoints, 3});
    c.meta["fps"] = kFps;
    c.meta["start_frame_global"] = 0;
    c.meta["text"] = clip.text;
    c.meta["motion_type"] = motion_type_name(clip.type);
    c.meta["scene_id"] = clip.scene_id;
    c.meta["mirrored"] = clip.mirrored;
    if (clip.goal) c.meta["goal"] = {clip.goal->x(), clip.goal->y(), clip.goal->z()};
    if (clip.object_id) c.meta["object_id"] = *clip.object_id;
    c.save(path);
}

LabeledClip load_clip(const std::string& path) {
    const auto c = ArrayContainer::load(path);
    LabeledClip clip;
    const auto& a = c.array("positions");
    const int n = static_cast<int>(a.shape.at(0));
    const auto pos = c.get_f4("positions");
    clip.positions.resize(n, kMotionDim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kMotionDim; ++j)
            clip.positions(i, j) = pos[static_cast<std::size_t>(i) * kMotionDim + j];
    clip.text = c.meta.at("text").get<std::string>();
    clip.type = motion_type_from_name(c.meta.at("motion_type").get<std::string>());
    clip.scene_id = c.meta.at("scene_id").get<std::string>();
    clip.mirrored = c.meta.value("mirrored", false);
    if (c.meta.contains("goal")) {
        const auto g = c.meta.at("goal").get<std::vector<double>>();
        clip.goal = Vec3(g[0], g[1], g[2]);
    }
    if (c.meta.contains("object_id")) clip.object_id = c.meta.at("object_id").get<std::string>();
    return clip;
}

// ---------------------------------------------------------------------------
// Windows and training examples

std::vector<ClipWindow> segment_clip(const LabeledClip& clip, int window) {
    if (clip.frames() < window) throw std::runtime_error("segment_clip: clip shorter than window");
    std::vector<ClipWindow> out;
    const int stride = window - 2;
    for (int start = 0; start + window <= clip.frames(); start += stride) {
        ClipWindow w;
        w.segment.positions = clip.positions.middleRows(start, window);
        w.segment.start_frame_global = start;
        w.frame_number = is_locomotion(clip.type) ? 0.0 : static_cast<double>(start);
        w.history = clip.positions.middleRows(start, 2);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<TrainingExample> clip_to_examples(const LabeledClip& clip, const SceneModel& scene,
                                              int window) {
    const auto& sk = Skeleton::instance();
    const StageType stage = stage_for_motion(clip.type);
    std::vector<TrainingExample> out;
    for (const auto& w : segment_clip(clip, window)) {
        TrainingExample ex;
        const auto [canon, frame] = canonicalize(w.segment);
        ex.x0_canonical = canon.positions;

        ex.cond.stage = stage;
        ex.cond.text = clip.text;
        ex.cond.frame_number = w.frame_number;

        const Vec3 pelvis0 = w.segment.joint(0, sk.pelvis);
        DualVoxelGoal goal;
        if (stage == StageType::kLocomotion) {
            const Vec3 disp = w.segment.joint(window - 1, sk.pelvis) - pelvis0;
            goal.point = pelvis0 + Vec3(disp.x(), disp.y(), 0.0);
            ex.cond.pelvis_direction =
                direction_to_canonical(Vec2(disp.x(), disp.y()), frame) / (window - 1);
        } else if (clip.goal) {
            goal.point = *clip.goal;
        }
        if (stage == StageType::kGrasp || stage == StageType::kPutDown) {
            ex.cond.hand_goal = transform_to_canonical(*clip.goal, frame);
        }
        ex.cond.voxels =
            pack_dual(build_dual_voxel(scene, pelvis0, frame.pelvis_yaw, stage, goal));
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<SchedulerExample> clip_to_scheduler_examples(const LabeledClip& clip, int window) {
    std::vector<SchedulerExample> out;
    const auto windows = segment_clip(clip, window);
    const int stride = window - 2;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        SchedulerExample ex;
        ex.segment_world = windows[i].segment;
        ex.frame_number = windows[i].frame_number;
        ex.text = clip.text;
        // positive when the window reaches the clip's final usable frame
        const int start = static_cast<int>(i) * stride;
        ex.stage_end = start + window + stride > clip.frames();
        out.push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset build / load

namespace {

std::string scene_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%03d", index);
    return buf;
}

}  // namespace

BuildSummary build_dataset(const RunConfig& cfg, const std::string& out_dir, Rng& rng) {
    fs::create_directories(out_dir);
    const int n_scenes = cfg.data.n_scenes;
    const int n_train = (n_scenes * 4 + 4) / 5;  // 4:1 split by scene

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    auto scenes_json = nlohmann::json::array();
    auto entries = nlohmann::json::array();

    BuildSummary summary;
    summary.n_scenes = n_scenes;

    SyntheticSceneSpec spec;
    spec.room_min = cfg.data.room_min;
    spec.room_max = cfg.data.room_max;
    spec.obstacles_min = cfg.data.obstacles_min;
    spec.obstacles_max = cfg.data.obstacles_max;

    for (int si = 0; si < n_scenes; ++si) {
        Rng scene_rng = rng.child(1000 + si);
        const std::string id = scene_dir_name(si);
        const std::string split = si < n_train ? "train" : "eval";
        const fs::path dir = fs::path(out_dir) / id;
        fs::create_directories(dir);

        const SceneModel scene = generate_scene(spec, scene_rng);
        save_scene(scene, (dir / "scene.json").string());
        scenes_json.push_back({{"id", id}, {"split", split}, {"file", id + "/scene.json"}});

        // clip mix per scene
        std::vector<MotionType> plan;
        const int walks = cfg.data.walk_clips_per_scene;
        for (int i = 0; i < walks; ++i) {
            const MotionType w[4] = {MotionType::kWalkForward, MotionType::kWalkBack,
                                     MotionType::kWalkLeft, MotionType::kWalkRight};
            plan.push_back(i < walks * 3 / 5 ? MotionType::kWalkForward : w[i % 4]);
        }
        const int inter = cfg.data.interaction_clips_per_scene;
        const MotionType cycle[8] = {MotionType::kPickUp,   MotionType::kPutDown,
                                     MotionType::kSitDown,  MotionType::kStandUp,
                                     MotionType::kDrink,    MotionType::kStandStill,
                                     MotionType::kTurnLeft, MotionType::kTurnRight};
        for (int i = 0; i < inter; ++i) plan.push_back(cycle[i % 8]);

        int clip_idx = 0;
        for (MotionType type : plan) {
            Rng clip_rng = scene_rng.child(7000 + clip_idx);
            LabeledClip clip;
            try {
                clip = generate_clip(type, scene, clip_rng);
            } catch (const std::runtime_error&) {
                ++clip_idx;
                continue;  // skip infeasible draws, the mix stays dense enough
            }
            clip.scene_id = id;
            char name[32];
            std::snprintf(name, sizeof(name), "clip_%04d.smc", clip_idx);
            save_clip(clip, (dir / name).string());
            entries.push_back({{"scene_id", id},
                               {"file", id + "/" + name},
                               {"split", split},
                               {"type", motion_type_name(clip.type)},
                               {"text", clip.text},
                               {"mirrored", false}});
            if (split == "train") ++summary.train_clips;
            else ++summary.eval_clips;

            if (split == "train") {
                const LabeledClip m = mirror_clip(clip);
                std::snprintf(name, sizeof(name), "clip_%04d_m.smc", clip_idx);
                save_clip(m, (dir / name).string());
                entries.push_back({{"scene_id", id},
                                   {"file", id + "/" + name},
                                   {"split", split},
                                   {"type", motion_type_name(m.type)},
                                   {"text", m.text},
                                   {"mirrored", true}});
                ++summary.train_clips;
            }
            ++clip_idx;
        }
    }

    manifest["scenes"] = scenes_json;
    manifest["clips"] = entries;
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream f(manifest_path);
    f << manifest.dump(2);
    summary.manifest_path = manifest_path;
    return summary;
}

const SceneModel& Dataset::scene_for(const Entry& e) const {
    if (!e.clip.mirrored) return scenes.at(e.clip.scene_id);
    return mirrored_scenes.at(e.clip.scene_id);
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw std::runtime_error("load_dataset: no manifest in " + dir);
    nlohmann::json manifest;
    f >> manifest;

    Dataset ds;
    for (const auto& s : manifest.at("scenes")) {
        const std::string id = s.at("id");
        ds.scenes[id] = load_scene((fs::path(dir) / s.at("file").get<std::string>()).string());
        ds.mirrored_scenes[id] = mirror_scene(ds.scenes[id]);
    }
    for (const auto& e : manifest.at("clips")) {
        Dataset::Entry entry;
        entry.clip = load_clip((fs::path(dir) / e.at("file").get<std::string>()).string());
        entry.split = e.at("split");
        ds.clips.push_back(std::move(entry));
    }
    return ds;
}

}  // namespace scenemotion
