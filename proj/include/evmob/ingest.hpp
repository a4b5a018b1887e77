#pragma once

#include "evmob/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evmob::ingest {

/// One evaluation scenario: the event days plus the pre-event observation
/// window used as history.
struct EventWindow {
    std::string name;
    LocalSeconds event_start{};
    LocalSeconds event_end{};
    std::optional<LocalSeconds> pre_event_start;
    std::optional<LocalSeconds> pre_event_end;
};

/// Returns an error message when the window ordering invariant
/// (pre_event_start < pre_event_end < event_start <= event_end) is broken.
std::optional<std::string> validate_event_window(const EventWindow& window);

struct DatasetStats {
    std::uint64_t checkin_count = 0;
    std::uint64_t unique_poi_count = 0;
    std::uint64_t unique_subcategory_count = 0;
    std::uint64_t user_count = 0;
};

struct BoundingBox {
    double lat_min, lat_max, lon_min, lon_max;
    bool contains(const GeoPoint& p) const {
        return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
    }
};

/// Input format descriptor for parse_records. One JSON check-in per line;
/// timestamps are RFC 3339 with offset and get re-expressed in tz_offset.
struct RecordFormat {
    std::chrono::minutes tz_offset{9 * 60};
};

struct SkippedLine {
    std::size_t line_number; // 1-based
    std::string reason;
};

struct ParseReport {
    std::vector<SkippedLine> skipped;
};

/// Parse line-delimited check-in records in input order. Malformed lines are
/// skipped and reported; an unreadable stream is fatal (IoError). Raw minute
/// precision is preserved — no grid snapping happens here.
std::vector<CheckIn> parse_records(std::istream& in, const RecordFormat& format,
                                   ParseReport* report = nullptr);

/// Serialize one record back to the JSON-lines schema.
std::string serialize_record(const CheckIn& record, std::chrono::minutes tz_offset);

struct AnonymizeOptions {
    std::string salt; // keyed-hash salt; same salt reproduces the same surrogates
};

/// Replace user_id and poi_id with stable integer surrogates (16-digit
/// zero-padded decimals derived from a salted SHA-256) and truncate
/// timestamps to minute precision. Ids already in surrogate form pass
/// through unchanged, which makes the operation idempotent. Record count and
/// order are preserved.
std::vector<CheckIn> anonymize_records(std::vector<CheckIn> records,
                                       const AnonymizeOptions& options);

/// True when id is already a 16-digit surrogate.
bool is_surrogate_id(std::string_view id);
std::string surrogate_id(std::string_view id, std::string_view salt);

struct PartitionReport {
    struct Rejected {
        std::size_t record_index;
        std::string reason;
    };
    std::vector<Rejected> rejected;
};

/// Group one user's pre-event records into per-day trajectories and split
/// them by date: days on or after event_start - short_window are short-term,
/// earlier days are long-term. Records at or after event_start are rejected
/// into the report.
UserHistory partition_history(std::span<const CheckIn> records, LocalSeconds event_start,
                              std::chrono::minutes short_window,
                              PartitionReport* report = nullptr);

DatasetStats dataset_statistics(std::span<const CheckIn> records);

/// Optional region filter (stands in for prefecture assignment).
std::vector<CheckIn> filter_bbox(std::vector<CheckIn> records, const BoundingBox& bbox);

} // namespace evmob::ingest
