#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>

#include "scenemotion/nn.hpp"
#include "scenemotion/scene.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Text embedding plug-in: embed(text) -> fixed-dim vector, deterministic per
// text.

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual Eigen::VectorXd embed(const std::string& text) const = 0;
    virtual int dim() const = 0;
};

// Offline default: hashed bag of tokens. Each lowercased token seeds a
// deterministic gaussian direction; the mean over tokens is normalized.
class HashedTextEmbedder : public TextEmbedder {
public:
    explicit HashedTextEmbedder(int dim = 768) : dim_(dim) {}
    Eigen::VectorXd embed(const std::string& text) const override;
    int dim() const override { return dim_; }

private:
    int dim_;
};

// Remote client behind the same interface: POST {"text": ...} to the URL in
// `url_env`, expects {"embedding": [...]}. Key (if any) sent as a bearer token.
class RemoteTextEmbedder : public TextEmbedder {
public:
    RemoteTextEmbedder(std::string url_env, std::string api_key_env, int dim = 768);
    Eigen::VectorXd embed(const std::string& text) const override;
    int dim() const override { return dim_; }

private:
    std::string url_env_, api_key_env_;
    int dim_;
};

// ---------------------------------------------------------------------------
// Bit-packed 32^3 patches; compact enough to cache per training window.

struct VoxelBits {
    std::array<std::uint64_t, 32 * 32 * 32 / 64> bits{};

    bool get(int idx) const { return (bits[idx >> 6] >> (idx & 63)) & 1; }
    void set(int idx) { bits[idx >> 6] |= (std::uint64_t{1} << (idx & 63)); }
    bool any() const {
        for (auto w : bits)
            if (w) return true;
        return false;
    }
};

struct DualVoxelBits {
    VoxelBits current, predictive;
};

VoxelBits pack_voxels(const LocalVoxelPatch& patch);
DualVoxelBits pack_dual(const DualVoxel& dv);

// ---------------------------------------------------------------------------
// The four condition tokens. Masked tokens are exactly zero.

struct ConditionSet {
    Eigen::VectorXd scene_token;
    Eigen::VectorXd text_token;
    Eigen::VectorXd pelvis_goal_token;
    Eigen::VectorXd hand_goal_token;
    bool scene_masked = false;
    bool pelvis_masked = false;
    bool hand_masked = false;
};

// Everything the encoders need for one segment.
struct ConditionInputs {
    DualVoxelBits voxels;
    std::string text;
    double frame_number = 0;  // 0 for locomotion
    Vec2 pelvis_direction{Vec2::Zero()};  // canonical frame, meters per frame
    Vec3 hand_goal{Vec3::Zero()};         // canonical frame
    StageType stage = StageType::kStationary;
};

bool scene_token_masked(StageType stage);   // hand-held small-object stages
bool pelvis_token_masked(StageType stage);  // everything but locomotion
bool hand_token_masked(StageType stage);    // everything but grasp / put-down

ConditionSet mask_scene_token(ConditionSet cs, StageType stage);

// ---------------------------------------------------------------------------
// ViT over the dual voxel: height as channels (2x32 for dual, 2 for the
// flattened ablation), 8x8 patches over the 32x32 plane, learned summary
// token readout.

struct SceneViTCache {
    nn::Mat tokens;       // (1 + 16) x width, input to the transformer
    nn::EncoderCache enc;
    std::vector<std::vector<int>> active;  // per patch, occupied feature rows
};

class SceneViT {
public:
    SceneViT() = default;
    SceneViT(nn::ParamStore& store, const std::string& name, int width, int layers, int heads,
             bool flat, Rng& rng);

    Eigen::VectorXd forward(const nn::ParamStore& s, const DualVoxelBits& dv,
                            SceneViTCache* cache = nullptr) const;
    void backward(const nn::ParamStore& s, const SceneViTCache& cache,
                  const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const;

    bool flat() const { return flat_; }

private:
    int patch_w_ = -1;    // (channels*64) x width
    int patch_b_ = -1;
    int summary_ = -1;    // 1 x width learned readout token
    nn::TransformerEncoder enc_;
    bool flat_ = false;

    std::vector<int> active_features(const DualVoxelBits& dv, int patch_index) const;
};

// ---------------------------------------------------------------------------
// Frame-embedded text token: embed(text) -> linear to width, add sinusoidal
// frame embedding, one more learned layer.

struct TextFrameCache {
    Eigen::VectorXd raw;     // embedder output
    Eigen::VectorXd summed;  // pre-activation input to the output layer
};

class TextFrameEncoder {
public:
    TextFrameEncoder() = default;
    TextFrameEncoder(nn::ParamStore& store, const std::string& name, int text_dim, int width,
                     bool frame_embedding, Rng& rng);

    Eigen::VectorXd forward(const nn::ParamStore& s, const TextEmbedder& embedder,
                            const std::string& text, double frame_number,
                            TextFrameCache* cache = nullptr) const;
    void backward(const nn::ParamStore& s, const TextFrameCache& cache,
                  const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const;

    bool frame_embedding_enabled() const { return frame_embedding_; }

private:
    nn::Linear text_proj_, out_;
    int width_ = 0;
    bool frame_embedding_ = true;
};

// ---------------------------------------------------------------------------
// Goal MLPs (2d locomotion direction, 3d hand target).

struct GoalCache {
    Eigen::VectorXd input;
    Eigen::VectorXd mid;  // pre-gelu
};

class GoalEncoder {
public:
    GoalEncoder() = default;
    GoalEncoder(nn::ParamStore& store, const std::string& name, int in_dim, int width, Rng& rng);

    Eigen::VectorXd forward(const nn::ParamStore& s, const Eigen::VectorXd& goal,
                            GoalCache* cache = nullptr) const;
    void backward(const nn::ParamStore& s, const GoalCache& cache,
                  const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const;

private:
    nn::Linear in_, out_;
};

// ---------------------------------------------------------------------------
// Bundle producing the full ConditionSet with masking, shared by the denoiser
// at train and sampling time.

struct ConditionCache {
    SceneViTCache scene;
    TextFrameCache text;
    GoalCache pelvis, hand;
    ConditionSet set;
};

class ConditionEncoder {
public:
    ConditionEncoder() = default;
    ConditionEncoder(nn::ParamStore& store, int width, int vit_layers, int vit_heads, int text_dim,
                     bool frame_embedding, bool flat_scene, Rng& rng);

    ConditionSet encode(const nn::ParamStore& s, const TextEmbedder& embedder,
                        const ConditionInputs& in, ConditionCache* cache = nullptr) const;
    void backward(const nn::ParamStore& s, const ConditionCache& cache,
                  const Eigen::VectorXd& dscene, const Eigen::VectorXd& dtext,
                  const Eigen::VectorXd& dpelvis, const Eigen::VectorXd& dhand,
                  nn::GradBuffer& gb) const;

    const SceneViT& scene_vit() const { return scene_; }
    const TextFrameEncoder& text_encoder() const { return text_; }
    const GoalEncoder& pelvis_goal_encoder() const { return pelvis_; }
    const GoalEncoder& hand_goal_encoder() const { return hand_; }
    int width() const { return width_; }

private:
    SceneViT scene_;
    TextFrameEncoder text_;
    GoalEncoder pelvis_, hand_;
    int width_ = 0;
};

}  // namespace scenemotion
