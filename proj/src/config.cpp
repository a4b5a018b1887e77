#include "evmob/config.hpp"

#include "evmob/errors.hpp"

#include <fstream>

namespace evmob::cli {

using nlohmann::json;

namespace {

LocalSeconds parse_config_time(const json& value, std::chrono::minutes tz_offset,
                               const char* key) {
    if (!value.is_string()) throw ConfigError(std::string(key) + " must be a string");
    const auto text = value.get<std::string>();
    if (auto utc = parse_rfc3339(text)) return to_local(*utc, tz_offset);
    if (auto day = parse_date(text)) return start_of_day(*day);
    throw ConfigError(std::string(key) + " must be RFC 3339 or YYYY-MM-DD, got '" + text +
                      "'");
}

} // namespace

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig config;

    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();

    if (doc.contains("provider")) {
        const json& p = doc["provider"];
        if (p.contains("base_url")) config.provider.base_url = p["base_url"];
        if (p.contains("path")) config.provider.path = p["path"];
        if (p.contains("model")) config.provider.model = p["model"];
        if (p.contains("credential_env")) config.provider.credential_env = p["credential_env"];
        if (p.contains("max_in_flight")) config.provider.max_in_flight = p["max_in_flight"];
        if (p.contains("max_attempts")) config.provider.max_attempts = p["max_attempts"];
        if (p.contains("backoff_base_ms"))
            config.provider.backoff_base_ms = p["backoff_base_ms"];
        if (p.contains("timeout_seconds"))
            config.provider.timeout_seconds = p["timeout_seconds"];
    }
    config.provider.jitter_seed = config.seed;

    if (doc.contains("loop")) {
        const json& l = doc["loop"];
        if (l.contains("max_iterations")) config.loop.max_iterations = l["max_iterations"];
        if (l.contains("ablate_internal")) config.loop.ablate_internal = l["ablate_internal"];
        if (l.contains("ablate_external")) config.loop.ablate_external = l["ablate_external"];
        if (l.contains("ablate_event_schema"))
            config.loop.ablate_event_schema = l["ablate_event_schema"];
    }
    if (config.loop.max_iterations < 1) throw ConfigError("loop.max_iterations must be >= 1");

    if (doc.contains("data")) {
        const json& d = doc["data"];
        if (d.contains("timezone")) {
            auto offset = parse_utc_offset(d["timezone"].get<std::string>());
            if (!offset)
                throw ConfigError("data.timezone must look like +09:00 or Z");
            config.data.tz_offset = *offset;
        }
        if (d.contains("short_window_days"))
            config.data.short_window_days = d["short_window_days"];
        if (config.data.short_window_days < 0)
            throw ConfigError("data.short_window_days must be >= 0");
        if (d.contains("grid_s")) config.data.grid_s = d["grid_s"];
        if (config.data.grid_s < 1) throw ConfigError("data.grid_s must be >= 1");
        if (d.contains("bbox")) {
            const json& b = d["bbox"];
            ingest::BoundingBox box{b.at("lat_min"), b.at("lat_max"), b.at("lon_min"),
                                    b.at("lon_max")};
            if (box.lat_min >= box.lat_max || box.lon_min >= box.lon_max)
                throw ConfigError("data.bbox is degenerate");
            config.data.bbox = box;
        }
        if (d.contains("cd_granularity")) {
            const auto g = d["cd_granularity"].get<std::string>();
            if (g == "category")
                config.data.cd_granularity = metrics::Granularity::category;
            else if (g == "subcategory")
                config.data.cd_granularity = metrics::Granularity::subcategory;
            else
                throw ConfigError("data.cd_granularity must be category or subcategory");
        }
        if (d.contains("sd_metric")) {
            const auto m = d["sd_metric"].get<std::string>();
            if (m == "haversine_km")
                config.data.sd_metric = metrics::DistanceMode::haversine_km;
            else if (m == "euclidean_degrees")
                config.data.sd_metric = metrics::DistanceMode::euclidean_degrees;
            else
                throw ConfigError(
                    "data.sd_metric must be haversine_km or euclidean_degrees");
        }
        if (d.contains("trip_rule")) {
            const json& t = d["trip_rule"];
            if (t.contains("use_poi")) config.data.trip_use_poi = t["use_poi"];
            if (t.contains("use_grid")) config.data.trip_use_grid = t["use_grid"];
        }
        if (d.contains("min_checkins_per_user"))
            config.data.min_checkins_per_user = d["min_checkins_per_user"].get<int>();
    }

    if (doc.contains("paths")) {
        const json& p = doc["paths"];
        if (p.contains("templates_dir"))
            config.paths.templates_dir = p["templates_dir"].get<std::string>();
        if (p.contains("cache_dir")) config.paths.cache_dir = p["cache_dir"].get<std::string>();
    }

    if (doc.contains("event")) {
        const json& e = doc["event"];
        ingest::EventWindow window;
        if (e.contains("name")) window.name = e["name"];
        window.event_start =
            parse_config_time(e.at("event_start"), config.data.tz_offset, "event.event_start");
        window.event_end =
            parse_config_time(e.at("event_end"), config.data.tz_offset, "event.event_end");
        if (e.contains("pre_event_start"))
            window.pre_event_start = parse_config_time(e["pre_event_start"],
                                                       config.data.tz_offset,
                                                       "event.pre_event_start");
        if (e.contains("pre_event_end"))
            window.pre_event_end = parse_config_time(e["pre_event_end"], config.data.tz_offset,
                                                     "event.pre_event_end");
        if (auto problem = ingest::validate_event_window(window))
            throw ConfigError("event window invalid: " + *problem);
        config.event = std::move(window);
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw ConfigError("config file is not valid JSON: " + path.string());
    RunConfig config = parse_config(doc);

    if (!std::filesystem::is_directory(config.paths.templates_dir))
        throw ConfigError("templates_dir does not exist: " +
                          config.paths.templates_dir.string());
    std::filesystem::create_directories(config.paths.cache_dir);
    return config;
}

} // namespace evmob::cli
