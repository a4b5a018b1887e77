#pragma once

#include "evmob/alignment.hpp"
#include "evmob/http_provider.hpp"
#include "evmob/ingest.hpp"
#include "evmob/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace evmob::cli {

struct DataSettings {
    std::chrono::minutes tz_offset{9 * 60}; // fixed local timezone (default UTC+9)
    int short_window_days = 7;
    std::optional<ingest::BoundingBox> bbox; // SGD box; computed from data when absent
    int grid_s = 10;
    metrics::Granularity cd_granularity = metrics::Granularity::subcategory;
    metrics::DistanceMode sd_metric = metrics::DistanceMode::haversine_km;
    bool trip_use_poi = true;
    bool trip_use_grid = true;
    std::optional<int> min_checkins_per_user; // history density floor, off by default
};

struct PathSettings {
    std::filesystem::path templates_dir = "templates";
    std::filesystem::path cache_dir = "cache";
};

/// Everything a run needs, collected from one JSON document. Flags override
/// config keys; precedence is flag > config > default.
struct RunConfig {
    llm::HttpProviderConfig provider;
    align::LoopConfig loop;
    DataSettings data;
    PathSettings paths;
    std::optional<ingest::EventWindow> event;
    std::uint64_t seed = 0;

    std::string anonymize_salt() const { return std::to_string(seed); }
    metrics::GridSpec grid_spec(const ingest::BoundingBox& box) const {
        return {data.grid_s, box.lat_min, box.lat_max, box.lon_min, box.lon_max};
    }
};

/// Parse and validate a config document. Referenced paths must exist
/// (cache_dir is created when missing); K >= 1 and S >= 1 are enforced.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const nlohmann::json& doc);

} // namespace evmob::cli
