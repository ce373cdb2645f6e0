#pragma once

#include <string>
#include <vector>

#include "scenemotion/orchestrator.hpp"
#include "scenemotion/scene.hpp"

namespace scenemotion {

// Minimal deterministic SVG emission: enough for metric bar charts and
// top-down trajectory overlays.

struct BarGroup {
    std::string label;
    std::vector<double> values;  // one per series
};

void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series,
                         const std::vector<BarGroup>& groups);

void write_trajectory_svg(const std::string& path, const SceneModel& scene,
                          const EpisodeResult& episode, const std::vector<Vec3>& markers);

}  // namespace scenemotion
