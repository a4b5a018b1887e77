#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace evmob {

/// Wall-clock time in the single configured local timezone. The pipeline
/// interprets every timestamp in one fixed UTC offset, so no tz database is
/// involved; arithmetic and calendar bucketing happen directly on local time.
using LocalSeconds = std::chrono::local_seconds;
using LocalDays = std::chrono::local_days;

/// Grid resolution for generated trajectories.
inline constexpr std::chrono::minutes kTimeGridStep{10};

/// Floor t to the 10-minute grid (minutes to the lower multiple of 10,
/// seconds zeroed). Idempotent; never moves t across a day boundary.
LocalSeconds snap_to_time_grid(LocalSeconds t);

LocalDays date_of(LocalSeconds t);
LocalSeconds start_of_day(LocalDays d);

/// Minutes elapsed since the local midnight of t's calendar day.
std::chrono::minutes minute_of_day(LocalSeconds t);

/// Parse an RFC 3339 timestamp ("2020-04-07T18:33:00+09:00"; 'Z' and a space
/// separator are accepted, fractional seconds are dropped) to a UTC instant.
std::optional<std::chrono::sys_seconds> parse_rfc3339(std::string_view text);

/// Convert a UTC instant into the configured fixed-offset wall clock.
LocalSeconds to_local(std::chrono::sys_seconds utc, std::chrono::minutes utc_offset);
std::chrono::sys_seconds to_utc(LocalSeconds local, std::chrono::minutes utc_offset);

/// Parse "+09:00" / "-05:30" / "Z" into an offset.
std::optional<std::chrono::minutes> parse_utc_offset(std::string_view text);

/// "YYYY-MM-DD"
std::optional<LocalDays> parse_date(std::string_view text);
/// "HH:MM"
std::optional<std::chrono::minutes> parse_hhmm(std::string_view text);

std::string format_rfc3339(LocalSeconds local, std::chrono::minutes utc_offset);
std::string format_date(LocalDays d);
std::string format_hhmm(LocalSeconds t);

} // namespace evmob
