#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scenemotion/geometry.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Skeleton: 28 joints, 22 body + 2 per hand + 2 head leaves.

struct Skeleton {
    static constexpr int kNumJoints = 28;

    static const Skeleton& instance();

    std::array<std::string, kNumJoints> joint_names;
    std::array<int, kNumJoints> parents;  // -1 for pelvis
    std::array<Vec3, kNumJoints> rest_offsets;  // standing rest pose, world, facing +y

    std::vector<int> body;        // 22
    std::vector<int> left_hand;   // 2
    std::vector<int> right_hand;  // 2
    std::vector<int> head;        // 2
    std::vector<std::pair<int, int>> mirror_pairs;

    int pelvis = 0;
    int left_hip = 0, right_hip = 0;
    int left_wrist = 0, right_wrist = 0;
    int left_index_tip = 0, right_index_tip = 0;
    int left_foot = 0, right_foot = 0;
    int left_ankle = 0, right_ankle = 0;

    int index(const std::string& name) const;

    // FNV hash of names+parents; stored in checkpoints so a model is never
    // applied to a different joint layout.
    std::uint64_t fingerprint() const;
};

// ---------------------------------------------------------------------------
// Motion containers. Positions are stored as (frames x 84) with column
// j*3+axis, meters, 30 fps.

constexpr int kFps = 30;
constexpr int kMotionDim = Skeleton::kNumJoints * 3;

using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MotionSegment {
    FrameMatrix positions;  // W x 84
    int start_frame_global = 0;

    int frames() const { return static_cast<int>(positions.rows()); }
    Vec3 joint(int frame, int j) const {
        return Vec3(positions(frame, j * 3), positions(frame, j * 3 + 1), positions(frame, j * 3 + 2));
    }
    void set_joint(int frame, int j, const Vec3& p) {
        positions(frame, j * 3) = p.x();
        positions(frame, j * 3 + 1) = p.y();
        positions(frame, j * 3 + 2) = p.z();
    }
    static MotionSegment zeros(int w) {
        MotionSegment s;
        s.positions = FrameMatrix::Zero(w, kMotionDim);
        return s;
    }
};

struct CanonicalFrame {
    Vec3 pelvis_position{Vec3::Zero()};
    double pelvis_yaw = 0.0;  // in (-pi, pi]
};

// Facing direction of a pose row: vertical axis crossed with the hip lateral
// axis, horizontal. Falls back to `fallback_yaw` when degenerate.
double facing_yaw(const Eigen::Ref<const Eigen::RowVectorXd>& frame,
                  std::optional<double> fallback_yaw = std::nullopt);

std::pair<MotionSegment, CanonicalFrame> canonicalize(const MotionSegment& seg);
MotionSegment decanonicalize(const MotionSegment& seg, const CanonicalFrame& frame);
// Express a segment in a given frame (the inverse of decanonicalize).
FrameMatrix canonicalize_to(const MotionSegment& seg, const CanonicalFrame& frame);

Vec3 transform_to_canonical(const Vec3& p, const CanonicalFrame& f);
Vec3 transform_from_canonical(const Vec3& p, const CanonicalFrame& f);
Vec2 direction_to_canonical(const Vec2& d, const CanonicalFrame& f);

// Replaces frames [0,1] of `new_seg` with `history` (2 x 84). Shapes must
// match; start_frame_global is preserved.
MotionSegment stitch(const FrameMatrix& history, const MotionSegment& new_seg);

// Reflect across the sagittal plane (x -> -x) and swap left/right joints.
MotionSegment mirror(const MotionSegment& seg);

// Growing global joint track fed by overlapping segments.
class MotionTrack {
public:
    void seed(const FrameMatrix& first_two);          // 2 x 84
    void append_segment(const MotionSegment& seg);    // frames [0,1] must equal the tail
    const FrameMatrix& frames() const { return frames_; }
    int length() const { return static_cast<int>(frames_.rows()); }
    FrameMatrix tail(int n) const { return frames_.bottomRows(n); }

private:
    FrameMatrix frames_;
};

// ---------------------------------------------------------------------------
// Object pose tracks

struct ObjectPose {
    Vec3 location{Vec3::Zero()};
    Mat3 rotation{Mat3::Identity()};
};

enum class AttachState { kNone, kLeftHand, kRightHand };

struct ObjectPoseTrack {
    std::string object_id;
    std::vector<ObjectPose> poses;             // one per motion frame
    std::vector<AttachState> attach_states;    // same length
};

// Hand frame used for rigid binding: origin at the wrist, yaw from the
// wrist->index horizontal direction.
struct HandFrame {
    Vec3 origin;
    double yaw;
};
HandFrame hand_frame(const Eigen::Ref<const Eigen::RowVectorXd>& frame, bool right_hand);

}  // namespace scenemotion
