// Timing harness comparing the serial reference kernels against their OpenMP
// counterparts: scene voxelization, local patch extraction, penetration
// queries, and a denoiser forward pass batch.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "scenemotion/data.hpp"
#include "scenemotion/diffusion.hpp"

using namespace scenemotion;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    SyntheticSceneSpec spec;
    spec.obstacles_min = 8;
    spec.obstacles_max = 8;
    Rng rng(7);
    const SceneModel scene = generate_scene(spec, rng);

    // voxelization at walkable-map resolution
    row("voxelize_scene (5 cm)",
        time_ms([&] { voxelize_scene_serial(scene, 0.05); }, 5),
        time_ms([&] { voxelize_scene(scene, 0.05); }, 5));

    // local patches
    std::vector<Vec3> centers;
    std::vector<double> yaws;
    for (int i = 0; i < 64; ++i) {
        centers.emplace_back(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), 0.95);
        yaws.push_back(rng.uniform(-kPi, kPi));
    }
    row("extract_local_patch x64",
        time_ms(
            [&] {
                for (int i = 0; i < 64; ++i)
                    extract_local_patch_serial(scene, centers[i], yaws[i]);
            },
            3),
        time_ms(
            [&] {
                for (int i = 0; i < 64; ++i) extract_local_patch(scene, centers[i], yaws[i]);
            },
            3));

    // penetration queries
    std::vector<Vec3> points;
    for (int i = 0; i < 200000; ++i)
        points.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2));
    row("penetration_depths (200k)",
        time_ms([&] { penetration_depths_serial(points, scene); }, 3),
        time_ms([&] { penetration_depths(points, scene); }, 3));

    // batched denoiser training step (parallel over samples)
    {
        RunConfig cfg = desk_profile();
        Rng mrng(11);
        DenoiserModel model(cfg.diffusion, mrng);
        HashedTextEmbedder embedder(cfg.diffusion.text_dim);
        Rng crng(13);
        std::vector<TrainingExample> batch;
        for (int i = 0; i < 16; ++i) {
            TrainingExample ex;
            ex.x0_canonical = FrameMatrix::Random(cfg.diffusion.window, kMotionDim);
            ex.cond.stage = StageType::kLocomotion;
            ex.cond.text = "walk forward";
            ex.cond.pelvis_direction = Vec2(0.0, 0.03);
            for (int b = 0; b < 60; ++b) {
                ex.cond.voxels.current.set(crng.uniform_int(0, 32767));
                ex.cond.voxels.predictive.set(crng.uniform_int(0, 32767));
            }
            batch.push_back(std::move(ex));
        }
        model.set_stats(Eigen::VectorXd::Zero(kMotionDim), Eigen::VectorXd::Ones(kMotionDim));

        auto run_batch = [&](bool parallel) {
            nn::GradBuffer g0(model.params()), g1(model.params());
            std::vector<nn::GradBuffer*> grads = {&g0, &g1};
#pragma omp parallel for schedule(static) if (parallel)
            for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
#ifdef _OPENMP
                const int tid = omp_get_thread_num() % 2;
#else
                const int tid = 0;
#endif
                Rng srng(100 + i);
                model.training_loss(embedder, batch[i].x0_canonical, batch[i].cond, srng,
                                    grads[tid]);
            }
        };
        row("denoiser grad batch x16", time_ms([&] { run_batch(false); }, 2),
            time_ms([&] { run_batch(true); }, 2));
    }
    return 0;
}
