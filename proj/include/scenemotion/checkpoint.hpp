#pragma once

#include <memory>
#include <optional>
#include <string>

#include "scenemotion/config.hpp"
#include "scenemotion/diffusion.hpp"
#include "scenemotion/featurizer.hpp"
#include "scenemotion/scheduler.hpp"

namespace scenemotion {

// Optional training state stored next to the weights so runs resume
// deterministically.
struct TrainerState {
    nn::Adam adam;
    Rng rng;
    int next_epoch = 0;
};

void save_denoiser(const DenoiserModel& model, const std::string& path,
                   const TrainerState* trainer = nullptr, std::uint64_t config_hash = 0);
std::unique_ptr<DenoiserModel> load_denoiser(const std::string& path,
                                             TrainerState* trainer = nullptr);

void save_scheduler(const SchedulerModel& model, const std::string& path,
                    const TrainerState* trainer = nullptr, std::uint64_t config_hash = 0);
std::unique_ptr<SchedulerModel> load_scheduler(const std::string& path,
                                               TrainerState* trainer = nullptr);

void save_featurizer(const MotionFeaturizer& model, const std::string& path,
                     std::uint64_t config_hash = 0);
std::unique_ptr<MotionFeaturizer> load_featurizer(const std::string& path);

}  // namespace scenemotion
