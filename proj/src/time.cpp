#include "evmob/time.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace evmob {

namespace {

bool parse_int(std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

} // namespace

LocalSeconds snap_to_time_grid(LocalSeconds t) {
    using namespace std::chrono;
    auto mins = floor<minutes>(t);
    auto rem = mins.time_since_epoch().count() % kTimeGridStep.count();
    if (rem < 0) rem += kTimeGridStep.count(); // pre-epoch times floor downward too
    return LocalSeconds{mins - minutes{rem}};
}

LocalDays date_of(LocalSeconds t) {
    return std::chrono::floor<std::chrono::days>(t);
}

LocalSeconds start_of_day(LocalDays d) {
    return LocalSeconds{d};
}

std::chrono::minutes minute_of_day(LocalSeconds t) {
    return std::chrono::floor<std::chrono::minutes>(t - start_of_day(date_of(t)));
}

std::optional<std::chrono::minutes> parse_utc_offset(std::string_view text) {
    using std::chrono::minutes;
    if (text == "Z" || text == "z") return minutes{0};
    if (text.size() != 6 || (text[0] != '+' && text[0] != '-') || text[3] != ':')
        return std::nullopt;
    int hh = 0, mm = 0;
    if (!parse_int(text.substr(1, 2), hh) || !parse_int(text.substr(4, 2), mm))
        return std::nullopt;
    if (hh > 23 || mm > 59) return std::nullopt;
    minutes off{hh * 60 + mm};
    return text[0] == '-' ? -off : off;
}

std::optional<LocalDays> parse_date(std::string_view text) {
    using namespace std::chrono;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!all_digits(text.substr(0, 4)) || !all_digits(text.substr(5, 2)) ||
        !all_digits(text.substr(8, 2)))
        return std::nullopt;
    parse_int(text.substr(0, 4), y);
    parse_int(text.substr(5, 2), m);
    parse_int(text.substr(8, 2), d);
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                       day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return LocalDays{local_days{ymd}};
}

std::optional<std::chrono::minutes> parse_hhmm(std::string_view text) {
    if (text.size() != 5 || text[2] != ':') return std::nullopt;
    int hh = 0, mm = 0;
    if (!all_digits(text.substr(0, 2)) || !all_digits(text.substr(3, 2)))
        return std::nullopt;
    parse_int(text.substr(0, 2), hh);
    parse_int(text.substr(3, 2), mm);
    if (hh > 23 || mm > 59) return std::nullopt;
    return std::chrono::minutes{hh * 60 + mm};
}

std::optional<std::chrono::sys_seconds> parse_rfc3339(std::string_view text) {
    using namespace std::chrono;
    // Minimum form: YYYY-MM-DDTHH:MMZ (seconds optional in practice even
    // though RFC 3339 requires them; minute-obfuscated feeds may drop them).
    if (text.size() < 17) return std::nullopt;
    auto date = parse_date(text.substr(0, 10));
    if (!date) return std::nullopt;
    char sep = text[10];
    if (sep != 'T' && sep != 't' && sep != ' ') return std::nullopt;

    auto hm = parse_hhmm(text.substr(11, 5));
    if (!hm) return std::nullopt;
    std::size_t pos = 16;
    seconds secs{0};
    if (pos < text.size() && text[pos] == ':') {
        if (pos + 2 >= text.size() || !all_digits(text.substr(pos + 1, 2)))
            return std::nullopt;
        int ss = 0;
        parse_int(text.substr(pos + 1, 2), ss);
        if (ss > 60) return std::nullopt; // leap second tolerated on input
        if (ss == 60) ss = 59;
        secs = seconds{ss};
        pos += 3;
        if (pos < text.size() && text[pos] == '.') { // drop fractional part
            ++pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
                ++pos;
        }
    }
    if (pos >= text.size()) return std::nullopt; // offset is mandatory
    auto offset = parse_utc_offset(text.substr(pos));
    if (!offset) return std::nullopt;

    local_seconds wall = local_seconds{*date} + *hm + secs;
    return sys_seconds{(wall - *offset).time_since_epoch()};
}

LocalSeconds to_local(std::chrono::sys_seconds utc, std::chrono::minutes utc_offset) {
    return LocalSeconds{(utc + utc_offset).time_since_epoch()};
}

std::chrono::sys_seconds to_utc(LocalSeconds local, std::chrono::minutes utc_offset) {
    return std::chrono::sys_seconds{(local - utc_offset).time_since_epoch()};
}

std::string format_rfc3339(LocalSeconds local, std::chrono::minutes utc_offset) {
    using namespace std::chrono;
    year_month_day ymd{date_of(local)};
    hh_mm_ss<seconds> tod{local - start_of_day(date_of(local))};
    int off = static_cast<int>(utc_offset.count());
    char sign = off < 0 ? '-' : '+';
    if (off < 0) off = -off;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                  static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()), sign, off / 60, off % 60);
    return buf;
}

std::string format_date(LocalDays d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_hhmm(LocalSeconds t) {
    int m = static_cast<int>(minute_of_day(t).count());
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", m / 60, m % 60);
    return buf;
}

} // namespace evmob
