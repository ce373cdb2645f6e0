#include "scenemotion/encoders.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace scenemotion {

// ---------------------------------------------------------------------------
// Text embedders

Eigen::VectorXd HashedTextEmbedder::embed(const std::string& text) const {
    if (text.empty()) throw std::runtime_error("text embedder: empty text");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
    int tokens = 0;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        Rng rng(fnv1a(cur));
        for (int i = 0; i < dim_; ++i) acc(i) += rng.gaussian();
        ++tokens;
        cur.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    if (tokens == 0) throw std::runtime_error("text embedder: no tokens in text");
    acc /= tokens;
    const double n = acc.norm();
    if (n > 1e-12) acc /= n;
    return acc;
}

RemoteTextEmbedder::RemoteTextEmbedder(std::string url_env, std::string api_key_env, int dim)
    : url_env_(std::move(url_env)), api_key_env_(std::move(api_key_env)), dim_(dim) {}

Eigen::VectorXd RemoteTextEmbedder::embed(const std::string& text) const {
    const char* url = std::getenv(url_env_.c_str());
    if (!url) throw std::runtime_error("remote embedder: " + url_env_ + " not set");
    std::string base(url), path = "/";
    // split scheme://host[:port]/path
    auto scheme_end = base.find("://");
    auto path_pos = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_pos != std::string::npos) {
        path = base.substr(path_pos);
        base = base.substr(0, path_pos);
    }
    httplib::Client client(base);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(api_key_env_.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    nlohmann::json req{{"text", text}};
    const auto res = client.Post(path, headers, req.dump(), "application/json");
    if (!res || res->status != 200)
        throw std::runtime_error("remote embedder: request failed");
    const auto body = nlohmann::json::parse(res->body);
    const auto vec = body.at("embedding").get<std::vector<double>>();
    if (static_cast<int>(vec.size()) != dim_)
        throw std::runtime_error("remote embedder: wrong embedding size");
    return Eigen::Map<const Eigen::VectorXd>(vec.data(), dim_);
}

// ---------------------------------------------------------------------------
// Voxel packing

VoxelBits pack_voxels(const LocalVoxelPatch& patch) {
    VoxelBits b;
    for (int i = 0; i < 32 * 32 * 32; ++i)
        if (patch.occupancy[i]) b.set(i);
    return b;
}

DualVoxelBits pack_dual(const DualVoxel& dv) {
    return {pack_voxels(dv.current), pack_voxels(dv.predictive)};
}

// ---------------------------------------------------------------------------
// Masking rules

bool scene_token_masked(StageType stage) { return stage == StageType::kSmallObjectInteraction; }
bool pelvis_token_masked(StageType stage) { return stage != StageType::kLocomotion; }
bool hand_token_masked(StageType stage) {
    return stage != StageType::kGrasp && stage != StageType::kPutDown;
}

ConditionSet mask_scene_token(ConditionSet cs, StageType stage) {
    if (scene_token_masked(stage)) {
        cs.scene_token.setZero();
        cs.scene_masked = true;
    }
    return cs;
}

// ---------------------------------------------------------------------------
// SceneViT

namespace {

constexpr int kPatchGrid = 4;   // 4x4 patches of 8x8 cells
constexpr int kPatchCells = 8;
constexpr int kNumPatches = kPatchGrid * kPatchGrid;

inline int cell_index(int ix, int iy, int iz) { return ix + 32 * (iy + 32 * iz); }

}  // namespace

SceneViT::SceneViT(nn::ParamStore& store, const std::string& name, int width, int layers,
                   int heads, bool flat, Rng& rng)
    : flat_(flat) {
    const int channels = flat ? 2 : 64;
    const int in_dim = channels * kPatchCells * kPatchCells;
    patch_w_ = store.add(name + ".patch.w", in_dim, width, 1.0 / std::sqrt(in_dim), rng);
    patch_b_ = store.add(name + ".patch.b", 1, width, 0.0, rng);
    summary_ = store.add(name + ".summary", 1, width, 0.02, rng);
    enc_ = nn::TransformerEncoder(store, name + ".enc", width, layers, heads, rng);
}

// Occupied feature rows of one patch token; the patch embedding is a sparse
// sum over these rows since voxel values are binary.
std::vector<int> SceneViT::active_features(const DualVoxelBits& dv, int patch_index) const {
    const int px = patch_index % kPatchGrid;
    const int py = patch_index / kPatchGrid;
    std::vector<int> rows;
    if (!flat_) {
        // channels: 0..31 current z-slices, 32..63 predictive z-slices
        for (int c = 0; c < 64; ++c) {
            const VoxelBits& v = c < 32 ? dv.current : dv.predictive;
            const int iz = c % 32;
            for (int dy = 0; dy < kPatchCells; ++dy)
                for (int dx = 0; dx < kPatchCells; ++dx) {
                    const int ix = px * kPatchCells + dx;
                    const int iy = py * kPatchCells + dy;
                    if (v.get(cell_index(ix, iy, iz)))
                        rows.push_back(c * kPatchCells * kPatchCells + dy * kPatchCells + dx);
                }
        }
    } else {
        // flattened ablation: one channel per patch marking column occupancy
        for (int c = 0; c < 2; ++c) {
            const VoxelBits& v = c == 0 ? dv.current : dv.predictive;
            for (int dy = 0; dy < kPatchCells; ++dy)
                for (int dx = 0; dx < kPatchCells; ++dx) {
                    const int ix = px * kPatchCells + dx;
                    const int iy = py * kPatchCells + dy;
                    bool any = false;
                    for (int iz = 0; iz < 32 && !any; ++iz) any = v.get(cell_index(ix, iy, iz));
                    if (any) rows.push_back(c * kPatchCells * kPatchCells + dy * kPatchCells + dx);
                }
        }
    }
    return rows;
}

Eigen::VectorXd SceneViT::forward(const nn::ParamStore& s, const DualVoxelBits& dv,
                                  SceneViTCache* cache) const {
    const nn::Mat& w = s.value(patch_w_);
    const int width = static_cast<int>(w.cols());
    nn::Mat tokens(1 + kNumPatches, width);
    tokens.row(0) = s.value(summary_).row(0);
    std::vector<std::vector<int>> active;
    active.reserve(kNumPatches);
    for (int p = 0; p < kNumPatches; ++p) {
        auto rows = active_features(dv, p);
        Eigen::RowVectorXd tok = s.value(patch_b_).row(0);
        for (int r : rows) tok += w.row(r);
        tokens.row(1 + p) = tok;
        active.push_back(std::move(rows));
    }
    tokens += nn::positional_encoding(1 + kNumPatches, width);

    nn::EncoderCache enc_cache;
    const nn::Mat out = enc_.forward(s, tokens, cache ? &enc_cache : nullptr);
    if (cache) {
        cache->tokens = tokens;
        cache->enc = std::move(enc_cache);
        cache->active = std::move(active);
    }
    return out.row(0).transpose();
}

void SceneViT::backward(const nn::ParamStore& s, const SceneViTCache& cache,
                        const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const {
    const int width = static_cast<int>(dtoken.size());
    nn::Mat dout = nn::Mat::Zero(1 + kNumPatches, width);
    dout.row(0) = dtoken.transpose();
    const nn::Mat dtokens = enc_.backward(s, cache.enc, dout, gb);
    gb.g[summary_].row(0) += dtokens.row(0);
    for (int p = 0; p < kNumPatches; ++p) {
        gb.g[patch_b_].row(0) += dtokens.row(1 + p);
        for (int r : cache.active[p]) gb.g[patch_w_].row(r) += dtokens.row(1 + p);
    }
}

// ---------------------------------------------------------------------------
// TextFrameEncoder

TextFrameEncoder::TextFrameEncoder(nn::ParamStore& store, const std::string& name, int text_dim,
                                   int width, bool frame_embedding, Rng& rng)
    : width_(width), frame_embedding_(frame_embedding) {
    text_proj_ = nn::Linear(store, name + ".text_proj", text_dim, width, rng);
    out_ = nn::Linear(store, name + ".out", width, width, rng);
}

Eigen::VectorXd TextFrameEncoder::forward(const nn::ParamStore& s, const TextEmbedder& embedder,
                                          const std::string& text, double frame_number,
                                          TextFrameCache* cache) const {
    if (text.empty()) throw std::runtime_error("encode_text_with_frame: empty text");
    const Eigen::VectorXd raw = embedder.embed(text);
    Eigen::VectorXd summed = text_proj_.forward(s, raw.transpose()).row(0).transpose();
    if (frame_embedding_) summed += nn::sinusoidal_embedding(frame_number, width_);
    const nn::Mat act = nn::gelu(summed.transpose());
    const Eigen::VectorXd token = out_.forward(s, act).row(0).transpose();
    if (cache) {
        cache->raw = raw;
        cache->summed = summed;
    }
    return token;
}

void TextFrameEncoder::backward(const nn::ParamStore& s, const TextFrameCache& cache,
                                const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const {
    const nn::Mat act = nn::gelu(cache.summed.transpose());
    const nn::Mat dact = out_.backward(s, act, dtoken.transpose(), gb);
    const nn::Mat dsummed = nn::gelu_backward(cache.summed.transpose(), dact);
    text_proj_.backward(s, cache.raw.transpose(), dsummed, gb);
}

// ---------------------------------------------------------------------------
// GoalEncoder

GoalEncoder::GoalEncoder(nn::ParamStore& store, const std::string& name, int in_dim, int width,
                         Rng& rng) {
    in_ = nn::Linear(store, name + ".in", in_dim, width, rng);
    out_ = nn::Linear(store, name + ".out", width, width, rng);
}

Eigen::VectorXd GoalEncoder::forward(const nn::ParamStore& s, const Eigen::VectorXd& goal,
                                     GoalCache* cache) const {
    if (!goal.allFinite()) throw std::runtime_error("goal encoder: non-finite input");
    const nn::Mat mid = in_.forward(s, goal.transpose());
    const nn::Mat act = nn::gelu(mid);
    const Eigen::VectorXd token = out_.forward(s, act).row(0).transpose();
    if (cache) {
        cache->input = goal;
        cache->mid = mid.row(0).transpose();
    }
    return token;
}

void GoalEncoder::backward(const nn::ParamStore& s, const GoalCache& cache,
                           const Eigen::VectorXd& dtoken, nn::GradBuffer& gb) const {
    const nn::Mat act = nn::gelu(cache.mid.transpose());
    const nn::Mat dact = out_.backward(s, act, dtoken.transpose(), gb);
    const nn::Mat dmid = nn::gelu_backward(cache.mid.transpose(), dact);
    in_.backward(s, cache.input.transpose(), dmid, gb);
}

// ---------------------------------------------------------------------------
// ConditionEncoder

ConditionEncoder::ConditionEncoder(nn::ParamStore& store, int width, int vit_layers, int vit_heads,
                                   int text_dim, bool frame_embedding, bool flat_scene, Rng& rng)
    : width_(width) {
    scene_ = SceneViT(store, "cond.scene", width, vit_layers, vit_heads, flat_scene, rng);
    text_ = TextFrameEncoder(store, "cond.text", text_dim, width, frame_embedding, rng);
    pelvis_ = GoalEncoder(store, "cond.pelvis", 2, width, rng);
    hand_ = GoalEncoder(store, "cond.hand", 3, width, rng);
}

ConditionSet ConditionEncoder::encode(const nn::ParamStore& s, const TextEmbedder& embedder,
                                      const ConditionInputs& in, ConditionCache* cache) const {
    ConditionSet cs;
    cs.scene_masked = scene_token_masked(in.stage);
    cs.pelvis_masked = pelvis_token_masked(in.stage);
    cs.hand_masked = hand_token_masked(in.stage);

    cs.scene_token = cs.scene_masked
                         ? Eigen::VectorXd::Zero(width_).eval()
                         : scene_.forward(s, in.voxels, cache ? &cache->scene : nullptr);
    const double frame = in.stage == StageType::kLocomotion ? 0.0 : in.frame_number;
    cs.text_token = text_.forward(s, embedder, in.text, frame, cache ? &cache->text : nullptr);
    cs.pelvis_goal_token =
        cs.pelvis_masked ? Eigen::VectorXd::Zero(width_).eval()
                         : pelvis_.forward(s, in.pelvis_direction, cache ? &cache->pelvis : nullptr);
    cs.hand_goal_token = cs.hand_masked
                             ? Eigen::VectorXd::Zero(width_).eval()
                             : hand_.forward(s, in.hand_goal, cache ? &cache->hand : nullptr);
    if (cache) cache->set = cs;
    return cs;
}

void ConditionEncoder::backward(const nn::ParamStore& s, const ConditionCache& cache,
                                const Eigen::VectorXd& dscene, const Eigen::VectorXd& dtext,
                                const Eigen::VectorXd& dpelvis, const Eigen::VectorXd& dhand,
                                nn::GradBuffer& gb) const {
    if (!cache.set.scene_masked) scene_.backward(s, cache.scene, dscene, gb);
    text_.backward(s, cache.text, dtext, gb);
    if (!cache.set.pelvis_masked) pelvis_.backward(s, cache.pelvis, dpelvis, gb);
    if (!cache.set.hand_masked) hand_.backward(s, cache.hand, dhand, gb);
}

}  // namespace scenemotion
