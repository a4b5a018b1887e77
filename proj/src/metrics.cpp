#include "evmob/metrics.hpp"

#include "evmob/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <unordered_set>

namespace evmob::metrics {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string format_range_label(double lo, double hi) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[%.6g,%.6g)", lo, hi);
    return buf;
}

Distribution normalized(std::vector<std::string> labels, const std::vector<double>& counts) {
    Distribution dist;
    dist.labels = std::move(labels);
    dist.mass.assign(counts.size(), 0.0);
    double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total > 0.0)
        for (std::size_t i = 0; i < counts.size(); ++i) dist.mass[i] = counts[i] / total;
    return dist;
}

} // namespace

bool Distribution::all_zero() const {
    return std::all_of(mass.begin(), mass.end(), [](double m) { return m == 0.0; });
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.lat * kDegToRad, lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0), s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    // atan2 form stays well conditioned near antipodal pairs.
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

Distribution build_si_distribution(std::span<const Trajectory> trajs) {
    std::vector<double> counts(kSiBinCount, 0.0);
    for (const Trajectory& traj : trajs) {
        for (std::size_t i = 1; i < traj.steps.size(); ++i) {
            auto interval = std::chrono::floor<std::chrono::minutes>(
                traj.steps[i].time - traj.steps[i - 1].time);
            auto bin = interval.count() / 10;
            if (bin < 0 || bin >= kSiBinCount) continue; // impossible within one day
            counts[static_cast<std::size_t>(bin)] += 1.0;
        }
    }
    std::vector<std::string> labels(kSiBinCount);
    for (int i = 0; i < kSiBinCount; ++i) labels[i] = format_range_label(i * 10, (i + 1) * 10);
    return normalized(std::move(labels), counts);
}

std::vector<double> sd_bin_edges() {
    std::vector<double> edges(31);
    for (int k = 0; k <= 30; ++k) edges[k] = 0.1 * std::pow(10.0, k / 10.0);
    edges[30] = 100.0; // exact upper edge
    return edges;
}

double step_distance(const GeoPoint& a, const GeoPoint& b, DistanceMode mode) {
    if (mode == DistanceMode::haversine_km) return haversine_km(a, b);
    const double dlat = b.lat - a.lat, dlon = b.lon - a.lon;
    return std::sqrt(dlat * dlat + dlon * dlon);
}

Distribution build_sd_distribution(std::span<const Trajectory> trajs, DistanceMode mode) {
    static const std::vector<double> edges = sd_bin_edges();
    std::vector<double> counts(kSdBinCount, 0.0);
    for (const Trajectory& traj : trajs) {
        for (std::size_t i = 1; i < traj.steps.size(); ++i) {
            double d = step_distance(traj.steps[i - 1].point, traj.steps[i].point, mode);
            std::size_t bin;
            if (d < edges.front()) {
                bin = 0;
            } else if (d >= edges.back()) {
                bin = kSdBinCount - 1;
            } else {
                auto it = std::upper_bound(edges.begin(), edges.end(), d);
                bin = static_cast<std::size_t>(it - edges.begin()); // 1..30
            }
            counts[bin] += 1.0;
        }
    }
    std::vector<std::string> labels(kSdBinCount);
    labels[0] = format_range_label(0.0, edges.front());
    for (int k = 0; k < 30; ++k) labels[k + 1] = format_range_label(edges[k], edges[k + 1]);
    labels[kSdBinCount - 1] = "[100,inf)";
    return normalized(std::move(labels), counts);
}

std::map<std::string, std::uint64_t> visit_counts(std::span<const Trajectory> trajs,
                                                  Granularity granularity) {
    std::map<std::string, std::uint64_t> counts;
    for (const Trajectory& traj : trajs)
        for (const Step& step : traj.steps)
            ++counts[granularity == Granularity::category ? step.category : step.subcategory];
    return counts;
}

Distribution build_cd_distribution(std::span<const Trajectory> trajs,
                                   Granularity granularity) {
    auto by_label = visit_counts(trajs, granularity);
    std::vector<std::string> labels;
    std::vector<double> counts;
    labels.reserve(by_label.size());
    counts.reserve(by_label.size());
    for (const auto& [label, count] : by_label) {
        labels.push_back(label);
        counts.push_back(static_cast<double>(count));
    }
    return normalized(std::move(labels), counts);
}

CellCounts grid_cell_counts(std::span<const Trajectory> trajs, const GridSpec& grid) {
    if (!grid.valid()) throw ContractError("degenerate grid bounding box");
    CellCounts cells;
    const auto s = static_cast<std::size_t>(grid.s);
    cells.counts.assign(s * s, 0);
    const double dlat = (grid.lat_max - grid.lat_min) / grid.s;
    const double dlon = (grid.lon_max - grid.lon_min) / grid.s;
    for (const Trajectory& traj : trajs) {
        for (const Step& step : traj.steps) {
            const GeoPoint& p = step.point;
            if (p.lat < grid.lat_min || p.lat > grid.lat_max || p.lon < grid.lon_min ||
                p.lon > grid.lon_max) {
                ++cells.dropped;
                continue;
            }
            auto row = static_cast<std::size_t>((p.lat - grid.lat_min) / dlat);
            auto col = static_cast<std::size_t>((p.lon - grid.lon_min) / dlon);
            if (row >= s) row = s - 1; // clamp the max edge into the last cell
            if (col >= s) col = s - 1;
            ++cells.counts[row * s + col];
        }
    }
    return cells;
}

std::vector<std::size_t> retained_cells(const CellCounts& reference, int s) {
    const auto total = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    if (reference.counts.size() != total)
        throw ContractError("reference cell counts do not match the grid size");
    const auto keep = static_cast<std::size_t>(
        std::ceil(0.25 * static_cast<double>(total)));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    // Descending by count, ascending index on ties.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return reference.counts[a] > reference.counts[b];
    });
    order.resize(std::min(keep, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

SgdResult build_sgd_distribution(std::span<const Trajectory> trajs, const GridSpec& grid,
                                 const CellCounts& reference) {
    CellCounts own = grid_cell_counts(trajs, grid);
    const std::vector<std::size_t> retained = retained_cells(reference, grid.s);

    std::vector<std::string> labels;
    std::vector<double> counts;
    labels.reserve(retained.size());
    counts.reserve(retained.size());
    const auto s = static_cast<std::size_t>(grid.s);
    for (std::size_t cell : retained) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "cell(%zu,%zu)", cell / s, cell % s);
        labels.emplace_back(buf);
        counts.push_back(static_cast<double>(own.counts[cell]));
    }
    SgdResult result;
    result.dist = normalized(std::move(labels), counts);
    result.dropped_out_of_bbox = own.dropped;
    return result;
}

double jsd(const Distribution& p, const Distribution& q) {
    if (p.labels != q.labels)
        throw ContractError("jsd requires identical label lists");
    const double sum_p = std::accumulate(p.mass.begin(), p.mass.end(), 0.0);
    const double sum_q = std::accumulate(q.mass.begin(), q.mass.end(), 0.0);
    if (std::abs(sum_p - 1.0) > 1e-9 || std::abs(sum_q - 1.0) > 1e-9)
        throw ContractError("jsd requires normalized distributions");

    double divergence = 0.0;
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
        const double pi = p.mass[i], qi = q.mass[i];
        const double mi = 0.5 * (pi + qi);
        if (pi > 0.0) divergence += 0.5 * pi * std::log2(pi / mi);
        if (qi > 0.0) divergence += 0.5 * qi * std::log2(qi / mi);
    }
    return divergence;
}

double jsd_or_empty(const Distribution& p, const Distribution& q) {
    const bool p_zero = p.all_zero(), q_zero = q.all_zero();
    if (p_zero && q_zero) return 0.0;
    if (p_zero || q_zero) return 1.0;
    return jsd(p, q);
}

double radius_of_gyration_km(std::span<const GeoPoint> points) {
    if (points.empty()) throw ContractError("radius of gyration needs at least one point");
    double lat0 = 0.0, lon0 = 0.0;
    for (const GeoPoint& p : points) {
        lat0 += p.lat;
        lon0 += p.lon;
    }
    lat0 /= static_cast<double>(points.size());
    lon0 /= static_cast<double>(points.size());

    const double coslat = std::cos(lat0 * kDegToRad);
    double sum_sq = 0.0;
    for (const GeoPoint& p : points) {
        const double x = kEarthRadiusKm * (p.lon - lon0) * kDegToRad * coslat;
        const double y = kEarthRadiusKm * (p.lat - lat0) * kDegToRad;
        sum_sq += x * x + y * y;
    }
    return std::sqrt(sum_sq / static_cast<double>(points.size()));
}

MobilityStats mobility_statistics(std::span<const Trajectory> trajs, DistanceMode mode) {
    MobilityStats stats;
    if (trajs.empty()) return stats;
    double checkins = 0.0, rog = 0.0, distance = 0.0, duration_h = 0.0;
    std::vector<GeoPoint> points;
    for (const Trajectory& traj : trajs) {
        checkins += static_cast<double>(traj.steps.size());
        points.clear();
        for (const Step& step : traj.steps) points.push_back(step.point);
        if (!points.empty()) rog += radius_of_gyration_km(points);
        for (std::size_t i = 1; i < traj.steps.size(); ++i)
            distance += step_distance(traj.steps[i - 1].point, traj.steps[i].point, mode);
        if (traj.steps.size() >= 2) {
            auto span = traj.steps.back().time - traj.steps.front().time;
            duration_h += std::chrono::duration<double, std::ratio<3600>>(span).count();
        }
    }
    const auto n = static_cast<double>(trajs.size());
    stats.mean_daily_checkins = checkins / n;
    stats.mean_radius_of_gyration_km = rog / n;
    stats.mean_total_travel_distance_km = distance / n;
    stats.mean_daily_activity_duration_hours = duration_h / n;
    return stats;
}

bool trajectory_has_trip(const Trajectory& traj, const TripRule& rule) {
    for (std::size_t i = 1; i < traj.steps.size(); ++i) {
        const Step& a = traj.steps[i - 1];
        const Step& b = traj.steps[i];
        if (rule.use_poi && !a.poi_id.empty() && !b.poi_id.empty() && a.poi_id != b.poi_id)
            return true;
        if (rule.use_grid && rule.grid.valid()) {
            const double dlat = (rule.grid.lat_max - rule.grid.lat_min) / rule.grid.s;
            const double dlon = (rule.grid.lon_max - rule.grid.lon_min) / rule.grid.s;
            auto cell = [&](const GeoPoint& p) {
                auto row = static_cast<long>(std::floor((p.lat - rule.grid.lat_min) / dlat));
                auto col = static_cast<long>(std::floor((p.lon - rule.grid.lon_min) / dlon));
                return std::pair{row, col};
            };
            if (cell(a.point) != cell(b.point)) return true;
        }
    }
    return false;
}

ActiveUserScores evaluate_active_users(std::span<const Trajectory> generated,
                                       std::span<const Trajectory> truth,
                                       const TripRule& rule) {
    std::map<std::string, bool> predicted;
    for (const Trajectory& traj : generated) {
        bool& active = predicted[traj.user_id];
        active = active || trajectory_has_trip(traj, rule);
    }
    std::map<std::string, bool> actual;
    for (const Trajectory& traj : truth) {
        if (!predicted.contains(traj.user_id))
            throw ContractError("user-universe mismatch: truth user '" + traj.user_id +
                                "' has no generated counterpart");
        bool& active = actual[traj.user_id];
        active = active || trajectory_has_trip(traj, rule);
    }

    ActiveUserScores scores;
    for (const auto& [user, predicted_active] : predicted) {
        auto it = actual.find(user);
        const bool truly_active = it != actual.end() && it->second;
        if (predicted_active && truly_active)
            ++scores.tp;
        else if (predicted_active && !truly_active)
            ++scores.fp;
        else if (!predicted_active && truly_active)
            ++scores.fn;
        else
            ++scores.tn;
    }
    scores.precision =
        scores.tp + scores.fp > 0
            ? static_cast<double>(scores.tp) / static_cast<double>(scores.tp + scores.fp)
            : 0.0;
    scores.recall =
        scores.tp + scores.fn > 0
            ? static_cast<double>(scores.tp) / static_cast<double>(scores.tp + scores.fn)
            : 0.0;
    scores.f1 = scores.precision + scores.recall > 0.0
                    ? 2.0 * scores.precision * scores.recall /
                          (scores.precision + scores.recall)
                    : 0.0;
    return scores;
}

MetricReport compare(std::span<const Trajectory> generated,
                     std::span<const Trajectory> truth, const GridSpec& grid,
                     Granularity granularity, DistanceMode mode) {
    MetricReport report;

    report.jsd_si = jsd_or_empty(build_si_distribution(generated),
                                 build_si_distribution(truth));
    report.jsd_sd = jsd_or_empty(build_sd_distribution(generated, mode),
                                 build_sd_distribution(truth, mode));

    // CD over the union label universe of both sides.
    auto gen_counts = visit_counts(generated, granularity);
    auto truth_counts = visit_counts(truth, granularity);
    std::vector<std::string> labels;
    for (const auto& [label, _] : gen_counts) labels.push_back(label);
    for (const auto& [label, _] : truth_counts)
        if (!gen_counts.contains(label)) labels.push_back(label);
    std::sort(labels.begin(), labels.end());
    auto aligned = [&](const std::map<std::string, std::uint64_t>& counts) {
        std::vector<double> values;
        values.reserve(labels.size());
        for (const std::string& label : labels) {
            auto it = counts.find(label);
            values.push_back(it == counts.end() ? 0.0 : static_cast<double>(it->second));
        }
        return normalized(labels, values);
    };
    report.jsd_cd = jsd_or_empty(aligned(gen_counts), aligned(truth_counts));

    // SGD: retained-cell set anchored on truth.
    CellCounts reference = grid_cell_counts(truth, grid);
    SgdResult gen_sgd = build_sgd_distribution(generated, grid, reference);
    SgdResult truth_sgd = build_sgd_distribution(truth, grid, reference);
    report.jsd_sgd = jsd_or_empty(gen_sgd.dist, truth_sgd.dist);
    report.dropped_out_of_bbox = gen_sgd.dropped_out_of_bbox + truth_sgd.dropped_out_of_bbox;

    report.stats_generated = mobility_statistics(generated, mode);
    report.stats_truth = mobility_statistics(truth, mode);
    return report;
}

} // namespace evmob::metrics
