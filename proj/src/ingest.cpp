#include "evmob/ingest.hpp"

#include "evmob/errors.hpp"

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include <algorithm>
#include <cinttypes>
#include <istream>
#include <map>
#include <unordered_set>

namespace evmob::ingest {

using nlohmann::json;

std::optional<std::string> validate_event_window(const EventWindow& window) {
    if (window.event_start > window.event_end)
        return "event_start must not be after event_end";
    if (window.pre_event_start && window.pre_event_end) {
        if (*window.pre_event_start >= *window.pre_event_end)
            return "pre_event_start must precede pre_event_end";
        if (*window.pre_event_end >= window.event_start)
            return "pre-event window must end before event_start";
    } else if (window.pre_event_start || window.pre_event_end) {
        return "pre-event window needs both start and end";
    }
    return std::nullopt;
}

namespace {

std::optional<std::string> field_string(const json& doc, const char* key, bool required,
                                        std::string& error) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        if (required) error = std::string("missing field: ") + key;
        return std::nullopt;
    }
    if (!it->is_string()) {
        error = std::string("field is not a string: ") + key;
        return std::nullopt;
    }
    return it->get<std::string>();
}

std::optional<CheckIn> parse_one(const json& doc, const RecordFormat& format,
                                 std::string& error) {
    CheckIn record;
    auto user = field_string(doc, "user_id", true, error);
    if (!error.empty()) return std::nullopt;
    auto poi = field_string(doc, "poi_id", true, error);
    if (!error.empty()) return std::nullopt;
    auto subcat = field_string(doc, "subcategory", true, error);
    if (!error.empty()) return std::nullopt;
    auto cat = field_string(doc, "category", true, error);
    if (!error.empty()) return std::nullopt;
    auto stamp = field_string(doc, "timestamp", true, error);
    if (!error.empty()) return std::nullopt;

    if (!doc.contains("lat") || !doc["lat"].is_number() || !doc.contains("lon") ||
        !doc["lon"].is_number()) {
        error = "lat/lon missing or non-numeric";
        return std::nullopt;
    }
    record.point = {doc["lat"].get<double>(), doc["lon"].get<double>()};
    if (record.point.lat < -90.0 || record.point.lat > 90.0) {
        error = "lat out of range";
        return std::nullopt;
    }
    if (record.point.lon < -180.0 || record.point.lon > 180.0) {
        error = "lon out of range";
        return std::nullopt;
    }
    if (!geo_point_valid(record.point)) {
        error = "non-finite coordinates";
        return std::nullopt;
    }

    record.user_id = std::move(*user);
    record.poi_id = std::move(*poi);
    record.subcategory = std::move(*subcat);
    record.category = std::move(*cat);
    if (record.category.empty() || record.subcategory.empty()) {
        error = "category and subcategory must be non-empty";
        return std::nullopt;
    }

    auto utc = parse_rfc3339(*stamp);
    if (!utc) {
        error = "unparsable timestamp: " + *stamp;
        return std::nullopt;
    }
    record.timestamp = to_local(*utc, format.tz_offset);

    if (doc.contains("subcategory_id")) {
        if (!doc["subcategory_id"].is_number_integer()) {
            error = "subcategory_id is not an integer";
            return std::nullopt;
        }
        record.subcategory_id = doc["subcategory_id"].get<std::int64_t>();
    }
    if (doc.contains("comment")) {
        if (!doc["comment"].is_string()) {
            error = "comment is not a string";
            return std::nullopt;
        }
        record.comment = doc["comment"].get<std::string>();
    }
    return record;
}

} // namespace

std::vector<CheckIn> parse_records(std::istream& in, const RecordFormat& format,
                                   ParseReport* report) {
    std::vector<CheckIn> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line_number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3); // strip UTF-8 BOM
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
        std::string error;
        std::optional<CheckIn> record;
        if (doc.is_discarded() || !doc.is_object())
            error = "not a JSON object";
        else
            record = parse_one(doc, format, error);
        if (record) {
            records.push_back(std::move(*record));
        } else if (report) {
            report->skipped.push_back({line_number, error});
        }
    }
    if (in.bad()) throw IoError("record stream failed while reading");
    return records;
}

std::string serialize_record(const CheckIn& record, std::chrono::minutes tz_offset) {
    json doc;
    doc["user_id"] = record.user_id;
    doc["lat"] = record.point.lat;
    doc["lon"] = record.point.lon;
    doc["poi_id"] = record.poi_id;
    doc["subcategory"] = record.subcategory;
    if (record.subcategory_id) doc["subcategory_id"] = *record.subcategory_id;
    doc["category"] = record.category;
    doc["timestamp"] = format_rfc3339(record.timestamp, tz_offset);
    if (record.comment) doc["comment"] = *record.comment;
    return doc.dump();
}

bool is_surrogate_id(std::string_view id) {
    if (id.size() != 16) return false;
    return std::all_of(id.begin(), id.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

std::string surrogate_id(std::string_view id, std::string_view salt) {
    if (is_surrogate_id(id)) return std::string{id};
    std::string keyed;
    keyed.reserve(salt.size() + 1 + id.size());
    keyed.append(salt);
    keyed.push_back('\x1f');
    keyed.append(id);

    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(keyed.data()), keyed.size(), digest);
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i) value = (value << 8) | digest[i];
    value %= 10000000000000000ULL; // 16 decimal digits

    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIu64, value);
    return buf;
}

std::vector<CheckIn> anonymize_records(std::vector<CheckIn> records,
                                       const AnonymizeOptions& options) {
    using namespace std::chrono;
    for (CheckIn& record : records) {
        record.user_id = surrogate_id(record.user_id, options.salt);
        record.poi_id = surrogate_id(record.poi_id, options.salt);
        record.timestamp = floor<minutes>(record.timestamp);
    }
    return records;
}

UserHistory partition_history(std::span<const CheckIn> records, LocalSeconds event_start,
                              std::chrono::minutes short_window, PartitionReport* report) {
    UserHistory history;
    history.event_start = event_start;
    history.short_window = short_window;

    std::map<LocalDays, std::vector<Step>> days;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const CheckIn& record = records[i];
        if (record.timestamp >= event_start) {
            if (report)
                report->rejected.push_back({i, "record at or after event_start"});
            continue;
        }
        if (history.user_id.empty()) history.user_id = record.user_id;
        days[date_of(record.timestamp)].push_back(Step{record.timestamp, record.point,
                                                       record.category, record.subcategory,
                                                       record.poi_id});
    }

    const LocalSeconds boundary = event_start - short_window;
    for (auto& [date, steps] : days) {
        std::stable_sort(steps.begin(), steps.end(),
                         [](const Step& a, const Step& b) { return a.time < b.time; });
        Trajectory traj{history.user_id, date, std::move(steps)};
        if (start_of_day(date) >= boundary)
            history.short_term.push_back(std::move(traj));
        else
            history.long_term.push_back(std::move(traj));
    }
    return history;
}

DatasetStats dataset_statistics(std::span<const CheckIn> records) {
    DatasetStats stats;
    std::unordered_set<std::string> pois, subcategories, users;
    for (const CheckIn& record : records) {
        ++stats.checkin_count;
        pois.insert(record.poi_id);
        subcategories.insert(record.subcategory);
        users.insert(record.user_id);
    }
    stats.unique_poi_count = pois.size();
    stats.unique_subcategory_count = subcategories.size();
    stats.user_count = users.size();
    return stats;
}

std::vector<CheckIn> filter_bbox(std::vector<CheckIn> records, const BoundingBox& bbox) {
    std::erase_if(records, [&](const CheckIn& r) { return !bbox.contains(r.point); });
    return records;
}

} // namespace evmob::ingest
