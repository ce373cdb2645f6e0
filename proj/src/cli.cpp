#include "scenemotion/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "scenemotion/benchmark.hpp"
#include "scenemotion/checkpoint.hpp"
#include "scenemotion/data.hpp"
#include "scenemotion/plots.hpp"

namespace scenemotion {

namespace fs = std::filesystem;

namespace {

nlohmann::json provenance(const RunConfig& cfg, const std::string& command) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    return {{"config_hash", hash},
            {"seed", cfg.seed},
            {"code_version", kVersionString},
            {"command", command}};
}

std::string variant_checkpoint_path(const RunConfig& cfg, const std::string& variant) {
    if (variant == "full") return cfg.paths.checkpoint;
    const fs::path p(cfg.paths.checkpoint);
    fs::path out = p.parent_path() / (p.stem().string() + "." + variant + p.extension().string());
    return out.string();
}

DiffusionConfig variant_config(const RunConfig& cfg, const std::string& variant) {
    DiffusionConfig d = cfg.diffusion;
    if (variant == "flat-voxel") {
        d.scene_encoding = "flat";
    } else if (variant == "no-frame-embed") {
        d.frame_embedding = false;
    } else if (variant != "full") {
        throw std::runtime_error("unknown variant: " + variant);
    }
    return d;
}

std::vector<TrainingExample> training_examples(const Dataset& ds, int window) {
    std::vector<TrainingExample> out;
    for (const auto& e : ds.clips) {
        if (e.split != "train") continue;
        if (e.clip.frames() < window) continue;
        const auto ex = clip_to_examples(e.clip, ds.scene_for(e), window);
        out.insert(out.end(), ex.begin(), ex.end());
    }
    return out;
}

std::vector<SchedulerExample> scheduler_examples(const Dataset& ds, int window,
                                                 const std::string& split) {
    std::vector<SchedulerExample> out;
    for (const auto& e : ds.clips) {
        if (e.split != split) continue;
        if (e.clip.frames() < window) continue;
        const auto ex = clip_to_scheduler_examples(e.clip, window);
        out.insert(out.end(), ex.begin(), ex.end());
    }
    return out;
}

int motion_label(MotionType t) {
    const auto types = supported_motion_types();
    for (std::size_t i = 0; i < types.size(); ++i)
        if (types[i] == t) return static_cast<int>(i);
    return 0;
}

std::unique_ptr<MotionFeaturizer> load_or_train_featurizer(const RunConfig& cfg,
                                                           const Dataset& ds) {
    if (fs::exists(cfg.paths.featurizer_checkpoint))
        return load_featurizer(cfg.paths.featurizer_checkpoint);

    std::vector<LabeledMotion> examples;
    for (const auto& e : ds.clips) {
        if (e.split != "train") continue;
        examples.push_back({e.clip.positions, motion_label(e.clip.type)});
    }
    const int n_classes = static_cast<int>(supported_motion_types().size());
    Rng rng(cfg.seed ^ 0xfea7);
    auto model = std::make_unique<MotionFeaturizer>(cfg.featurizer, n_classes, rng);
    nn::Adam adam(model->params(), cfg.featurizer.lr);
    FeaturizerTrainOptions opts;
    opts.epochs = cfg.featurizer.epochs;
    opts.batch = cfg.featurizer.batch;
    opts.lr = cfg.featurizer.lr;
    opts.on_epoch = [](int epoch, double loss) {
        std::printf("featurizer epoch %d loss %.4f\n", epoch, loss);
    };
    Rng train_rng(cfg.seed ^ 0xfea8);
    train_featurizer(*model, examples, opts, train_rng, adam);
    fs::create_directories(fs::path(cfg.paths.featurizer_checkpoint).parent_path());
    save_featurizer(*model, cfg.paths.featurizer_checkpoint, cfg.hash());
    return model;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_generate_data(const RunConfig& cfg) {
    Rng rng(cfg.seed);
    const auto summary = build_dataset(cfg, cfg.paths.data_dir, rng);
    // provenance sidecar
    std::ofstream f(fs::path(cfg.paths.data_dir) / "provenance.json");
    f << provenance(cfg, "generate-data").dump(2) << "\n";
    std::printf("dataset: %d scenes, %d train clips (mirrored included), %d eval clips\n",
                summary.n_scenes, summary.train_clips, summary.eval_clips);
    std::printf("manifest: %s\n", summary.manifest_path.c_str());
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& variant, bool resume) {
    const auto ds = load_dataset(cfg.paths.data_dir);
    const DiffusionConfig dcfg = variant_config(cfg, variant);
    const auto examples = training_examples(ds, dcfg.window);
    std::printf("training %s on %zu windows\n", variant.c_str(), examples.size());

    const std::string ckpt = variant_checkpoint_path(cfg, variant);
    std::unique_ptr<DenoiserModel> model;
    TrainerState trainer;
    if (resume && fs::exists(ckpt)) {
        model = load_denoiser(ckpt, &trainer);
    } else {
        Rng init(cfg.seed ^ fnv1a("denoiser:" + variant));
        model = std::make_unique<DenoiserModel>(dcfg, init);
        trainer.adam = nn::Adam(model->params(), dcfg.lr);
        trainer.rng = Rng(cfg.seed ^ fnv1a("train:" + variant));
        trainer.next_epoch = 0;
    }

    HashedTextEmbedder embedder(dcfg.text_dim);
    const std::string loss_log = (fs::path(cfg.paths.out_dir) /
                                  ("train_loss_" + variant + ".jsonl")).string();
    fs::create_directories(cfg.paths.out_dir);
    std::ofstream log(loss_log, resume ? std::ios::app : std::ios::trunc);
    log << provenance(cfg, "train " + variant).dump() << "\n";

    TrainOptions opts;
    opts.epochs = dcfg.epochs - trainer.next_epoch;
    opts.batch = dcfg.batch;
    opts.lr = dcfg.lr;
    opts.on_epoch = [&](int epoch, double loss) {
        std::printf("epoch %d loss %.5f\n", epoch, loss);
        log << nlohmann::json({{"epoch", epoch}, {"loss", loss}}).dump() << "\n";
        log.flush();
    };
    if (opts.epochs > 0)
        train_denoiser(*model, embedder, examples, opts, trainer.rng, trainer.adam,
                       trainer.next_epoch);
    trainer.next_epoch = dcfg.epochs;

    fs::create_directories(fs::path(ckpt).parent_path());
    save_denoiser(*model, ckpt, &trainer, cfg.hash());
    std::printf("checkpoint: %s\n", ckpt.c_str());
    return 0;
}

int cmd_train_scheduler(const RunConfig& cfg, bool resume) {
    const auto ds = load_dataset(cfg.paths.data_dir);
    const auto examples = scheduler_examples(ds, cfg.diffusion.window, "train");
    std::printf("training scheduler on %zu windows\n", examples.size());

    const std::string ckpt = cfg.paths.scheduler_checkpoint;
    std::unique_ptr<SchedulerModel> model;
    TrainerState trainer;
    if (resume && fs::exists(ckpt)) {
        model = load_scheduler(ckpt, &trainer);
    } else {
        Rng init(cfg.seed ^ fnv1a("scheduler"));
        model = std::make_unique<SchedulerModel>(cfg.scheduler, init);
        trainer.adam = nn::Adam(model->params(), cfg.scheduler.lr);
        trainer.rng = Rng(cfg.seed ^ fnv1a("train:scheduler"));
        trainer.next_epoch = 0;
    }

    HashedTextEmbedder embedder(cfg.scheduler.text_dim);
    SchedulerTrainOptions opts;
    opts.epochs = cfg.scheduler.epochs - trainer.next_epoch;
    opts.batch = cfg.scheduler.batch;
    opts.lr = cfg.scheduler.lr;
    opts.on_epoch = [](int epoch, double loss) {
        std::printf("scheduler epoch %d loss %.5f\n", epoch, loss);
    };
    if (opts.epochs > 0) train_scheduler(*model, embedder, examples, opts, trainer.rng, trainer.adam);
    trainer.next_epoch = cfg.scheduler.epochs;

    const auto eval_examples = scheduler_examples(ds, cfg.diffusion.window, "eval");
    if (!eval_examples.empty()) {
        const double acc =
            scheduler_accuracy(*model, embedder, eval_examples, cfg.scheduler.threshold);
        std::printf("held-out stage-end accuracy: %.3f\n", acc);
    }

    fs::create_directories(fs::path(ckpt).parent_path());
    save_scheduler(*model, ckpt, &trainer, cfg.hash());
    std::printf("checkpoint: %s\n", ckpt.c_str());
    return 0;
}

int cmd_sample(const RunConfig& cfg, const SampleArgs& args) {
    SceneModel scene;
    if (!args.scene_path.empty()) {
        scene = load_scene(args.scene_path);
    } else {
        const auto ds = load_dataset(cfg.paths.data_dir);
        // first eval scene
        std::string id;
        for (const auto& [sid, s] : ds.scenes) id = sid;  // last id as fallback
        for (const auto& e : ds.clips)
            if (e.split == "eval") {
                id = e.clip.scene_id;
                break;
            }
        scene = ds.scenes.at(id);
    }

    auto denoiser = load_denoiser(cfg.paths.checkpoint);
    auto scheduler = load_scheduler(cfg.paths.scheduler_checkpoint);
    HashedTextEmbedder embedder(denoiser->config().text_dim);

    PlannerClientConfig pcfg = cfg.planner;
    if (!args.planner.empty()) pcfg.mode = args.planner;
    auto backend = make_planner(pcfg, cfg.sampling.speed);

    InstructionPlan plan;
    try {
        plan = plan_from_instruction(args.instruction, scene, args.goal, *backend);
    } catch (const PlanError& e) {
        if (pcfg.mode == "remote" && pcfg.fallback_to_offline) {
            std::fprintf(stderr, "planner: %s; falling back to the offline planner\n", e.what());
            RulePlanner fallback(cfg.sampling.speed);
            plan = plan_from_instruction(args.instruction, scene, args.goal, fallback);
        } else {
            throw;
        }
    }
    std::printf("plan: %zu steps\n", plan.steps.size());
    for (const auto& s : plan.steps)
        std::printf("  %d. [%s] %s\n", s.step_id, stage_name(s.stage), s.text.c_str());

    Rng start_rng(cfg.seed ^ 0x57a7);
    const Vec2 start = sample_standing_position(scene, start_rng);
    const double yaw = std::atan2(-(args.goal.x() - start.x()), args.goal.y() - start.y());

    EpisodeModels models{denoiser.get(), scheduler.get(), &embedder};
    Rng rng(cfg.seed);
    const EpisodeResult episode =
        run_episode(plan, scene, standing_start_pose(start, yaw), models, cfg, rng);

    fs::create_directories(cfg.paths.out_dir);
    const std::string out = args.out_path.empty()
                                ? (fs::path(cfg.paths.out_dir) / "episode.sme").string()
                                : args.out_path;
    save_episode(episode, out, provenance(cfg, "sample"));
    write_trajectory_svg((fs::path(out).replace_extension(".svg")).string(), scene, episode,
                         {args.goal});
    std::printf("episode: %d frames, %zu stages%s -> %s\n",
                static_cast<int>(episode.motion.rows()), episode.boundaries.size(),
                episode.truncated ? " (truncated)" : "", out.c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    const auto ds = load_dataset(cfg.paths.data_dir);
    auto denoiser = load_denoiser(cfg.paths.checkpoint);
    auto scheduler = load_scheduler(cfg.paths.scheduler_checkpoint);
    HashedTextEmbedder embedder(denoiser->config().text_dim);
    auto featurizer = load_or_train_featurizer(cfg, ds);

    std::unique_ptr<DenoiserModel> flat, nofe;
    const std::string flat_path = variant_checkpoint_path(cfg, "flat-voxel");
    const std::string nofe_path = variant_checkpoint_path(cfg, "no-frame-embed");
    if (fs::exists(flat_path)) flat = load_denoiser(flat_path);
    if (fs::exists(nofe_path)) nofe = load_denoiser(nofe_path);

    std::vector<const SceneModel*> eval_scenes;
    std::set<std::string> seen;
    for (const auto& e : ds.clips)
        if (e.split == "eval" && seen.insert(e.clip.scene_id).second)
            eval_scenes.push_back(&ds.scenes.at(e.clip.scene_id));
    if (eval_scenes.empty()) throw std::runtime_error("evaluate: no eval scenes");

    VariantSet variants;
    variants.full = denoiser.get();
    variants.flat_voxel = flat.get();
    variants.no_frame_embed = nofe.get();
    variants.scheduler = scheduler.get();
    variants.featurizer = featurizer.get();
    variants.embedder = &embedder;

    const auto report =
        run_benchmark(variants, eval_scenes, &ds, cfg.eval.episodes, cfg, cfg.seed);

    fs::create_directories(cfg.paths.out_dir);
    const auto out = fs::path(cfg.paths.out_dir);
    {
        std::ofstream f(out / "report.txt");
        f << provenance(cfg, "evaluate").dump() << "\n\n" << report.to_table();
    }
    {
        nlohmann::json j = report.to_json();
        j["provenance"] = provenance(cfg, "evaluate");
        std::ofstream f(out / "report.json");
        f << j.dump(2) << "\n";
    }
    // bar charts per setting
    for (const auto& [setting, variants_map] : report.summary) {
        std::vector<std::string> series;
        std::vector<BarGroup> groups;
        std::map<std::string, std::vector<double>> by_metric;
        for (const auto& [variant, metrics] : variants_map) {
            series.push_back(variant);
            for (const auto& [metric, s] : metrics) by_metric[metric].push_back(s.mean);
        }
        for (const auto& [metric, values] : by_metric) groups.push_back({metric, values});
        write_bar_chart_svg((out / ("metrics_" + setting + ".svg")).string(), setting, series,
                            groups);
    }
    std::printf("%s", report.to_table().c_str());
    std::printf("report: %s\n", (out / "report.txt").string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"Multi-stage character-scene interaction synthesis"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    app.add_option("--config", config_path, "JSON config file (defaults when omitted)");
    app.add_option("--seed", seed_override, "override the config seed");

    auto* gen = app.add_subcommand("generate-data", "build the synthetic dataset");

    auto* train = app.add_subcommand("train", "train the motion diffusion model");
    std::string variant = "full";
    bool resume = false;
    train->add_option("--variant", variant, "full | flat-voxel | no-frame-embed")
        ->check(CLI::IsMember({"full", "flat-voxel", "no-frame-embed"}));
    train->add_flag("--resume", resume, "resume from the existing checkpoint");

    auto* train_sched = app.add_subcommand("train-scheduler", "train the stage-end scheduler");
    bool resume_sched = false;
    train_sched->add_flag("--resume", resume_sched, "resume from the existing checkpoint");

    auto* sample = app.add_subcommand("sample", "synthesize an episode from an instruction");
    SampleArgs sargs;
    std::vector<double> goal_vec{0, 0, 0.95};
    sample->add_option("--instruction", sargs.instruction, "text instruction")->required();
    sample->add_option("--goal", goal_vec, "goal location x,y,z")->expected(3)->delimiter(',');
    sample->add_option("--scene", sargs.scene_path, "scene JSON file");
    sample->add_option("--out", sargs.out_path, "episode output path");
    sample->add_option("--planner", sargs.planner, "offline | remote")
        ->check(CLI::IsMember({"offline", "remote"}));

    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark suite");

    try {
        app.parse(argc, argv);
        RunConfig cfg = load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;

        if (gen->parsed()) return cmd_generate_data(cfg);
        if (train->parsed()) return cmd_train(cfg, variant, resume);
        if (train_sched->parsed()) return cmd_train_scheduler(cfg, resume_sched);
        if (sample->parsed()) {
            sargs.goal = Vec3(goal_vec[0], goal_vec[1], goal_vec[2]);
            return cmd_sample(cfg, sargs);
        }
        if (evaluate->parsed()) return cmd_evaluate(cfg);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace scenemotion
