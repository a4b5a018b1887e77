#include "evmob/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace evmob {

bool geo_point_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
           p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

TrajectoryValidation validate_trajectory(const Trajectory& traj) {
    TrajectoryValidation result;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const Step& step = traj.steps[i];
        if (i > 0 && step.time < traj.steps[i - 1].time)
            result.violations.push_back({i, "non-monotonic time at index " + std::to_string(i)});
        if (date_of(step.time) != traj.date)
            result.violations.push_back({i, "off-date step at index " + std::to_string(i)});
        if (snap_to_time_grid(step.time) != step.time)
            result.violations.push_back({i, "off-grid time at index " + std::to_string(i)});
        if (!geo_point_valid(step.point))
            result.violations.push_back({i, "invalid coordinates at index " + std::to_string(i)});
    }
    return result;
}

namespace {

void render_steps(std::ostringstream& out, const Trajectory& traj) {
    out << format_date(traj.date) << ":\n";
    if (traj.steps.empty()) {
        out << "  (no visits)\n";
        return;
    }
    char coords[64];
    for (const Step& s : traj.steps) {
        std::snprintf(coords, sizeof(coords), "(%.3f, %.3f)", s.point.lat, s.point.lon);
        out << "  " << format_hhmm(s.time) << ", " << s.category << ", "
            << s.subcategory << ", " << coords << "\n";
    }
}

} // namespace

std::string render_trajectories(std::span<const Trajectory> trajs) {
    if (trajs.empty()) return "(no recorded days)\n";
    std::ostringstream out;
    for (const Trajectory& t : trajs) render_steps(out, t);
    return out.str();
}

std::string render_trajectory(const Trajectory& traj) {
    std::ostringstream out;
    render_steps(out, traj);
    return out.str();
}

} // namespace evmob
