#include "scenemotion/motion.hpp"

#include <cmath>
#include <stdexcept>

#include "scenemotion/rng.hpp"

namespace scenemotion {

namespace {

Skeleton build_skeleton() {
    Skeleton s;
    const std::array<std::string, Skeleton::kNumJoints> names = {
        "pelvis",         "left_hip",        "right_hip",      "spine1",
        "left_knee",      "right_knee",      "spine2",         "left_ankle",
        "right_ankle",    "spine3",          "left_foot",      "right_foot",
        "neck",           "left_collar",     "right_collar",   "head",
        "left_shoulder",  "right_shoulder",  "left_elbow",     "right_elbow",
        "left_wrist",     "right_wrist",     "left_index_tip", "left_middle_tip",
        "right_index_tip","right_middle_tip","head_top",       "jaw"};
    s.joint_names = names;
    s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12,
                 13, 14, 16, 17, 18, 19, 20, 20, 21, 21, 15, 15};

    // Rest pose: standing at the origin, facing +y (right side at +x), z up.
    auto& r = s.rest_offsets;
    r[0] = {0.00, 0.00, 0.95};    // pelvis
    r[1] = {-0.09, 0.00, 0.91};   // left_hip
    r[2] = {0.09, 0.00, 0.91};    // right_hip
    r[3] = {0.00, -0.01, 1.07};   // spine1
    r[4] = {-0.10, 0.00, 0.50};   // left_knee
    r[5] = {0.10, 0.00, 0.50};    // right_knee
    r[6] = {0.00, -0.01, 1.19};   // spine2
    r[7] = {-0.10, 0.00, 0.09};   // left_ankle
    r[8] = {0.10, 0.00, 0.09};    // right_ankle
    r[9] = {0.00, -0.01, 1.31};   // spine3
    r[10] = {-0.10, 0.13, 0.03};  // left_foot (toe)
    r[11] = {0.10, 0.13, 0.03};   // right_foot (toe)
    r[12] = {0.00, 0.00, 1.43};   // neck
    r[13] = {-0.07, 0.01, 1.40};  // left_collar
    r[14] = {0.07, 0.01, 1.40};   // right_collar
    r[15] = {0.00, 0.01, 1.53};   // head
    r[16] = {-0.18, 0.00, 1.40};  // left_shoulder
    r[17] = {0.18, 0.00, 1.40};   // right_shoulder
    r[18] = {-0.22, 0.01, 1.12};  // left_elbow
    r[19] = {0.22, 0.01, 1.12};   // right_elbow
    r[20] = {-0.24, 0.02, 0.86};  // left_wrist
    r[21] = {0.24, 0.02, 0.86};   // right_wrist
    r[22] = {-0.25, 0.06, 0.76};  // left_index_tip
    r[23] = {-0.27, 0.04, 0.75};  // left_middle_tip
    r[24] = {0.25, 0.06, 0.76};   // right_index_tip
    r[25] = {0.27, 0.04, 0.75};   // right_middle_tip
    r[26] = {0.00, 0.01, 1.68};   // head_top
    r[27] = {0.00, 0.06, 1.50};   // jaw

    for (int i = 0; i < 22; ++i) s.body.push_back(i);
    s.left_hand = {22, 23};
    s.right_hand = {24, 25};
    s.head = {26, 27};
    s.mirror_pairs = {{1, 2},  {4, 5},  {7, 8},   {10, 11}, {13, 14},
                      {16, 17}, {18, 19}, {20, 21}, {22, 24}, {23, 25}};

    s.pelvis = 0;
    s.left_hip = 1;
    s.right_hip = 2;
    s.left_ankle = 7;
    s.right_ankle = 8;
    s.left_foot = 10;
    s.right_foot = 11;
    s.left_wrist = 20;
    s.right_wrist = 21;
    s.left_index_tip = 22;
    s.right_index_tip = 24;
    return s;
}

}  // namespace

const Skeleton& Skeleton::instance() {
    static const Skeleton s = build_skeleton();
    return s;
}

int Skeleton::index(const std::string& name) const {
    for (int i = 0; i < kNumJoints; ++i)
        if (joint_names[i] == name) return i;
    throw std::runtime_error("skeleton: unknown joint " + name);
}

std::uint64_t Skeleton::fingerprint() const {
    std::uint64_t h = 14695981039346656037ull;
    for (int i = 0; i < kNumJoints; ++i) {
        h = fnv1a(joint_names[i], h);
        h = fnv1a(std::to_string(parents[i]), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Canonicalization

double facing_yaw(const Eigen::Ref<const Eigen::RowVectorXd>& frame,
                  std::optional<double> fallback_yaw) {
    const auto& sk = Skeleton::instance();
    const int l = sk.left_hip, r = sk.right_hip;
    // lateral = right - left, horizontal; facing = up x lateral
    const double lx = frame(r * 3) - frame(l * 3);
    const double ly = frame(r * 3 + 1) - frame(l * 3 + 1);
    const double n = std::hypot(lx, ly);
    if (n < 1e-9) return fallback_yaw.value_or(0.0);
    // up x (lx,ly,0) = (-ly, lx, 0)
    const double fx = -ly / n, fy = lx / n;
    // yaw maps +y onto the facing direction: R(yaw) * (0,1) = (-sin,cos)
    return std::atan2(-fx, fy);
}

Vec3 transform_to_canonical(const Vec3& p, const CanonicalFrame& f) {
    const Vec3 d = p - f.pelvis_position;
    const Vec2 xy = rotate2(Vec2(d.x(), d.y()), -f.pelvis_yaw);
    return Vec3(xy.x(), xy.y(), d.z());
}

Vec3 transform_from_canonical(const Vec3& p, const CanonicalFrame& f) {
    const Vec2 xy = rotate2(Vec2(p.x(), p.y()), f.pelvis_yaw);
    return f.pelvis_position + Vec3(xy.x(), xy.y(), p.z());
}

Vec2 direction_to_canonical(const Vec2& d, const CanonicalFrame& f) {
    return rotate2(d, -f.pelvis_yaw);
}

std::pair<MotionSegment, CanonicalFrame> canonicalize(const MotionSegment& seg) {
    if (seg.frames() < 1) throw std::runtime_error("canonicalize: empty segment");
    const auto& sk = Skeleton::instance();
    CanonicalFrame f;
    f.pelvis_position = seg.joint(0, sk.pelvis);
    f.pelvis_yaw = wrap_angle(facing_yaw(seg.positions.row(0)));

    MotionSegment out = seg;
    for (int t = 0; t < seg.frames(); ++t)
        for (int j = 0; j < Skeleton::kNumJoints; ++j)
            out.set_joint(t, j, transform_to_canonical(seg.joint(t, j), f));
    return {out, f};
}

MotionSegment decanonicalize(const MotionSegment& seg, const CanonicalFrame& frame) {
    MotionSegment out = seg;
    for (int t = 0; t < seg.frames(); ++t)
        for (int j = 0; j < Skeleton::kNumJoints; ++j)
            out.set_joint(t, j, transform_from_canonical(seg.joint(t, j), frame));
    return out;
}

FrameMatrix canonicalize_to(const MotionSegment& seg, const CanonicalFrame& frame) {
    MotionSegment out = seg;
    for (int t = 0; t < seg.frames(); ++t)
        for (int j = 0; j < Skeleton::kNumJoints; ++j)
            out.set_joint(t, j, transform_to_canonical(seg.joint(t, j), frame));
    return out.positions;
}

// ---------------------------------------------------------------------------

MotionSegment stitch(const FrameMatrix& history, const MotionSegment& new_seg) {
    if (history.rows() != 2 || history.cols() != kMotionDim)
        throw std::runtime_error("stitch: history must be 2 x 84");
    if (new_seg.positions.cols() != kMotionDim)
        throw std::runtime_error("stitch: joint count mismatch");
    if (new_seg.frames() < 2) throw std::runtime_error("stitch: segment too short");
    MotionSegment out = new_seg;
    out.positions.topRows(2) = history;
    return out;
}

MotionSegment mirror(const MotionSegment& seg) {
    const auto& sk = Skeleton::instance();
    MotionSegment out = seg;
    // negate x everywhere
    for (int j = 0; j < Skeleton::kNumJoints; ++j)
        out.positions.col(j * 3) = -seg.positions.col(j * 3);
    // swap left/right columns
    for (const auto& [l, r] : sk.mirror_pairs) {
        for (int a = 0; a < 3; ++a) {
            out.positions.col(l * 3 + a).swap(out.positions.col(r * 3 + a));
        }
    }
    return out;
}

void MotionTrack::seed(const FrameMatrix& first_two) {
    if (first_two.rows() != 2 || first_two.cols() != kMotionDim)
        throw std::runtime_error("track: seed must be 2 x 84");
    frames_ = first_two;
}

void MotionTrack::append_segment(const MotionSegment& seg) {
    if (frames_.rows() < 2) throw std::runtime_error("track: seed before appending");
    if (seg.positions.cols() != kMotionDim) throw std::runtime_error("track: joint count mismatch");
    const FrameMatrix tail2 = frames_.bottomRows(2);
    if ((seg.positions.topRows(2) - tail2).cwiseAbs().maxCoeff() > 1e-6)
        throw std::runtime_error("track: segment head does not match history");
    const int w = seg.frames();
    const int old = static_cast<int>(frames_.rows());
    frames_.conservativeResize(old + w - 2, Eigen::NoChange);
    frames_.bottomRows(w - 2) = seg.positions.bottomRows(w - 2);
}

HandFrame hand_frame(const Eigen::Ref<const Eigen::RowVectorXd>& frame, bool right_hand) {
    const auto& sk = Skeleton::instance();
    const int wrist = right_hand ? sk.right_wrist : sk.left_wrist;
    const int index = right_hand ? sk.right_index_tip : sk.left_index_tip;
    const Vec3 w(frame(wrist * 3), frame(wrist * 3 + 1), frame(wrist * 3 + 2));
    const Vec3 i(frame(index * 3), frame(index * 3 + 1), frame(index * 3 + 2));
    const double dx = i.x() - w.x(), dy = i.y() - w.y();
    const double yaw = (std::hypot(dx, dy) < 1e-9) ? 0.0 : std::atan2(-dx, dy);
    return {w, yaw};
}

}  // namespace scenemotion
