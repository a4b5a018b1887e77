#pragma once

#include "evmob/model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace evmob::metrics {

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Great-circle distance in kilometers. Symmetric; zero iff the points
/// coincide.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Distance definition used for step distances and travel-distance totals.
/// haversine_km is the default; euclidean_degrees is the strict raw-L2 mode
/// (unit-inconsistent over geographic degrees, kept for comparability).
enum class DistanceMode { haversine_km, euclidean_degrees };

double step_distance(const GeoPoint& a, const GeoPoint& b, DistanceMode mode);

/// A labelled histogram with mass summing to 1, or all-zero when it was
/// built from empty data.
struct Distribution {
    std::vector<std::string> labels;
    std::vector<double> mass;
    bool all_zero() const;
};

/// Fixed S x S grid over a bounding box.
struct GridSpec {
    int s = 10;
    double lat_min = 0.0, lat_max = 0.0, lon_min = 0.0, lon_max = 0.0;
    bool valid() const { return s >= 1 && lat_min < lat_max && lon_min < lon_max; }
};

struct MobilityStats {
    double mean_daily_checkins = 0.0;
    double mean_radius_of_gyration_km = 0.0;
    double mean_total_travel_distance_km = 0.0;
    double mean_daily_activity_duration_hours = 0.0;
};

struct MetricReport {
    double jsd_si = 0.0;
    double jsd_sd = 0.0;
    double jsd_cd = 0.0;
    double jsd_sgd = 0.0;
    MobilityStats stats_generated;
    MobilityStats stats_truth;
    std::uint64_t dropped_out_of_bbox = 0;
};

/// Step intervals (minutes between consecutive same-day visits) in 144
/// ten-minute bins [0,10) ... [1430,1440).
Distribution build_si_distribution(std::span<const Trajectory> trajs);
inline constexpr int kSiBinCount = 144;

/// Step distances in 32 bins: underflow [0, 0.1 km), 30 log-spaced bins over
/// [0.1, 100] km, overflow [100, inf).
Distribution build_sd_distribution(std::span<const Trajectory> trajs,
                                   DistanceMode mode = DistanceMode::haversine_km);
inline constexpr int kSdBinCount = 32;
std::vector<double> sd_bin_edges(); // the 31 interior edges, 0.1 .. 100

enum class Granularity { category, subcategory };

/// Visit counts per activity label.
std::map<std::string, std::uint64_t> visit_counts(std::span<const Trajectory> trajs,
                                                  Granularity granularity);

/// Normalized activity-type distribution over the labels present in trajs
/// (label alignment across compared sets happens in compare()).
Distribution build_cd_distribution(std::span<const Trajectory> trajs,
                                   Granularity granularity);

/// Per-cell visit tallies in row-major order; visits on the max edge are
/// clamped into the last cell, visits outside the box are dropped and
/// counted.
struct CellCounts {
    std::vector<std::uint64_t> counts; // s*s entries
    std::uint64_t dropped = 0;
};
CellCounts grid_cell_counts(std::span<const Trajectory> trajs, const GridSpec& grid);

/// Top ceil(0.25 * s^2) cells by reference count, ties broken by row-major
/// index; returned ascending by index.
std::vector<std::size_t> retained_cells(const CellCounts& reference, int s);

struct SgdResult {
    Distribution dist;
    std::uint64_t dropped_out_of_bbox = 0;
};

/// Spatial grid distribution restricted to the cells retained from the
/// ground-truth reference counts, renormalized over that cell set.
SgdResult build_sgd_distribution(std::span<const Trajectory> trajs, const GridSpec& grid,
                                 const CellCounts& reference);

/// Jensen-Shannon divergence with base-2 logarithms; in [0,1], symmetric,
/// zero iff p == q. Requires identical label lists and unit mass on both
/// sides.
double jsd(const Distribution& p, const Distribution& q);

/// JSD with the empty-data convention used by compare(): two all-zero
/// distributions agree (0); an all-zero against a populated one is maximally
/// divergent (1).
double jsd_or_empty(const Distribution& p, const Distribution& q);

/// Root-mean-square planar distance to the centroid, computed on a local
/// equirectangular projection about the centroid. Requires >= 1 point.
double radius_of_gyration_km(std::span<const GeoPoint> points);

/// Means over all user-days of: visit count, total consecutive-pair travel
/// distance, activity duration (last minus first step), and daily radius of
/// gyration.
MobilityStats mobility_statistics(std::span<const Trajectory> trajs,
                                  DistanceMode mode = DistanceMode::haversine_km);

/// What counts as a trip for active-user classification: a consecutive step
/// pair at distinct poi_ids (when both known) or distinct grid cells.
struct TripRule {
    bool use_poi = true;
    bool use_grid = true;
    GridSpec grid;
};

bool trajectory_has_trip(const Trajectory& traj, const TripRule& rule);

struct ActiveUserScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Binary classification of "active" users (>= 1 trip on an event day).
/// The user universe is the generated side's user set; users present only
/// in the truth side raise ContractError ("user-universe mismatch").
ActiveUserScores evaluate_active_users(std::span<const Trajectory> generated,
                                       std::span<const Trajectory> truth,
                                       const TripRule& rule);

/// Build all four distribution pairs over a shared label/bin universe (the
/// SGD retained-cell set comes from truth), compute their JSDs and both
/// mobility statistics.
MetricReport compare(std::span<const Trajectory> generated,
                     std::span<const Trajectory> truth, const GridSpec& grid,
                     Granularity granularity,
                     DistanceMode mode = DistanceMode::haversine_km);

} // namespace evmob::metrics
