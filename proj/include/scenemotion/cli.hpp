#pragma once

#include <optional>
#include <string>

#include "scenemotion/config.hpp"
#include "scenemotion/geometry.hpp"

namespace scenemotion {

struct SampleArgs {
    std::string instruction;
    Vec3 goal{Vec3::Zero()};
    std::string scene_path;  // empty: first eval scene from the dataset
    std::string out_path;    // empty: <out_dir>/episode.sme
    std::string planner;     // empty: config value; "offline" | "remote"
};

int cmd_generate_data(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg, const std::string& variant, bool resume);
int cmd_train_scheduler(const RunConfig& cfg, bool resume);
int cmd_sample(const RunConfig& cfg, const SampleArgs& args);
int cmd_evaluate(const RunConfig& cfg);

int run_cli(int argc, char** argv);

}  // namespace scenemotion
