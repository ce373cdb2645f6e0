#include "scenemotion/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace scenemotion {

namespace {

const char* kSeriesColors[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4", "#8c613c"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series,
                         const std::vector<BarGroup>& groups) {
    const int width = 640, height = 360;
    const int ml = 60, mr = 20, mt = 40, mb = 60;
    double max_v = 1e-9;
    for (const auto& g : groups)
        for (double v : g.values) max_v = std::max(max_v, v);

    std::ofstream f(path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";

    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;
    const int n_groups = static_cast<int>(groups.size());
    const int n_series = std::max<std::size_t>(1, series.size());
    const double group_w = plot_w / std::max(1, n_groups);
    const double bar_w = group_w * 0.8 / n_series;

    // y axis
    f << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << (mt + plot_h)
      << "' stroke='black'/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = max_v * tick / 4;
        const double y = mt + plot_h - plot_h * tick / 4;
        f << "<text x='" << (ml - 6) << "' y='" << y + 4
          << "' text-anchor='end' font-size='10'>" << fmt(v) << "</text>\n";
        f << "<line x1='" << ml << "' y1='" << y << "' x2='" << (ml + plot_w) << "' y2='" << y
          << "' stroke='#dddddd'/>\n";
    }

    for (int gi = 0; gi < n_groups; ++gi) {
        const auto& g = groups[gi];
        for (std::size_t si = 0; si < g.values.size(); ++si) {
            const double h = plot_h * g.values[si] / max_v;
            const double x = ml + gi * group_w + group_w * 0.1 + si * bar_w;
            f << "<rect x='" << x << "' y='" << (mt + plot_h - h) << "' width='" << bar_w * 0.92
              << "' height='" << h << "' fill='" << kSeriesColors[si % 6] << "'/>\n";
        }
        f << "<text x='" << (ml + gi * group_w + group_w / 2) << "' y='" << (mt + plot_h + 16)
          << "' text-anchor='middle' font-size='11'>" << g.label << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const double x = ml + 10 + 130.0 * si;
        f << "<rect x='" << x << "' y='" << (height - 24) << "' width='12' height='12' fill='"
          << kSeriesColors[si % 6] << "'/>\n";
        f << "<text x='" << (x + 16) << "' y='" << (height - 14) << "' font-size='11'>"
          << series[si] << "</text>\n";
    }
    f << "</svg>\n";
}

void write_trajectory_svg(const std::string& path, const SceneModel& scene,
                          const EpisodeResult& episode, const std::vector<Vec3>& markers) {
    const int size = 600;
    const double margin = 30;
    const Vec3 lo = scene.bounds.min, hi = scene.bounds.max;
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    auto sx = [&](double x) { return margin + (x - lo.x()) / span * (size - 2 * margin); };
    auto sy = [&](double y) { return size - margin - (y - lo.y()) / span * (size - 2 * margin); };

    std::ofstream f(path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    f << "<rect x='" << sx(lo.x()) << "' y='" << sy(hi.y()) << "' width='"
      << (sx(hi.x()) - sx(lo.x())) << "' height='" << (sy(lo.y()) - sy(hi.y()))
      << "' fill='none' stroke='black'/>\n";

    for (const auto& b : scene.obstacles) {
        f << "<polygon points='";
        for (int corner = 0; corner < 4; ++corner) {
            const double cx = corner == 0 || corner == 3 ? b.half.x() : -b.half.x();
            const double cy = corner < 2 ? b.half.y() : -b.half.y();
            const Vec3 w = b.to_world(Vec3(cx, cy, 0));
            f << sx(w.x()) << "," << sy(w.y()) << " ";
        }
        const double tall = b.center.z() + b.half.z();
        f << "' fill='" << (tall > 1.4 ? "#9999bb" : "#bbbbcc") << "' stroke='#555566'/>\n";
    }

    // pelvis path
    const auto& sk = Skeleton::instance();
    f << "<polyline fill='none' stroke='#d65f5f' stroke-width='2' points='";
    for (int i = 0; i < episode.motion.rows(); ++i)
        f << sx(episode.motion(i, sk.pelvis * 3)) << "," << sy(episode.motion(i, sk.pelvis * 3 + 1))
          << " ";
    f << "'/>\n";

    for (const auto& m : markers)
        f << "<circle cx='" << sx(m.x()) << "' cy='" << sy(m.y())
          << "' r='6' fill='none' stroke='#2ca02c' stroke-width='2'/>\n";

    // stage boundary ticks along the path
    for (const auto& b : episode.boundaries) {
        const int fidx = std::min<int>(b.start_frame, static_cast<int>(episode.motion.rows()) - 1);
        f << "<circle cx='" << sx(episode.motion(fidx, sk.pelvis * 3)) << "' cy='"
          << sy(episode.motion(fidx, sk.pelvis * 3 + 1)) << "' r='3' fill='#4878cf'/>\n";
    }
    f << "</svg>\n";
}

}  // namespace scenemotion
