#pragma once

#include "evmob/time.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evmob {

struct GeoPoint {
    double lat = 0.0; // degrees, [-90, 90]
    double lon = 0.0; // degrees, [-180, 180]
};

bool geo_point_valid(const GeoPoint& p);

/// One raw check-in record: a geotagged, categorized, timestamped visit.
struct CheckIn {
    std::string user_id;
    GeoPoint point;
    std::string poi_id;
    std::string subcategory;
    std::optional<std::int64_t> subcategory_id;
    std::string category;
    LocalSeconds timestamp;
    std::optional<std::string> comment;
};

/// A visit inside a trajectory. Generated steps carry no poi_id.
struct Step {
    LocalSeconds time;
    GeoPoint point;
    std::string category;
    std::string subcategory;
    std::string poi_id;
};

/// One user's time-ordered visits within one calendar day. Zero steps is a
/// legal trajectory (the user stayed home).
struct Trajectory {
    std::string user_id;
    LocalDays date;
    std::vector<Step> steps;
};

struct TrajectoryViolation {
    std::size_t step_index;
    std::string message;
};

struct TrajectoryValidation {
    std::vector<TrajectoryViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks the trajectory invariants: nondecreasing step times, every step on
/// the trajectory's calendar day, every time on the 10-minute grid.
/// Violations are data, not exceptions.
TrajectoryValidation validate_trajectory(const Trajectory& traj);

/// A user's pre-event records split into disjoint long-term and short-term
/// day sets relative to the event start.
struct UserHistory {
    std::string user_id;
    std::vector<Trajectory> long_term;
    std::vector<Trajectory> short_term;
    LocalSeconds event_start{};
    std::chrono::minutes short_window{};
    bool empty() const { return long_term.empty() && short_term.empty(); }
};

/// Render trajectories for prompt embedding: one "HH:MM, category,
/// subcategory, (lat, lon)" line per visit, grouped under a date header,
/// coordinates rounded to 3 decimals.
std::string render_trajectories(std::span<const Trajectory> trajs);
std::string render_trajectory(const Trajectory& traj);

} // namespace evmob
