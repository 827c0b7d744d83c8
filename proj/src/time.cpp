#include "airnet/time.hpp"

#include "airnet/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace airnet {

// Howard Hinnant's algorithms, days relative to 1970-01-01.
std::int64_t days_from_civil(CivilDate d) {
    int y = d.year;
    const unsigned m = static_cast<unsigned>(d.month);
    const unsigned dd = static_cast<unsigned>(d.day);
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + dd - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned dd = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(dd)};
}

EpochSeconds epoch_from_civil(CivilDate d, int hour, int minute, double second) {
    return days_from_civil(d) * kSecondsPerDay + hour * 3600 + minute * 60 +
           static_cast<EpochSeconds>(second);
}

CivilDate local_date(EpochSeconds t, int utc_offset_minutes) {
    const EpochSeconds shifted = t + static_cast<EpochSeconds>(utc_offset_minutes) * 60;
    std::int64_t days = shifted / kSecondsPerDay;
    if (shifted < 0 && shifted % kSecondsPerDay != 0) --days;
    return civil_from_days(days);
}

int local_seconds_of_day(EpochSeconds t, int utc_offset_minutes) {
    const EpochSeconds shifted = t + static_cast<EpochSeconds>(utc_offset_minutes) * 60;
    EpochSeconds s = shifted % kSecondsPerDay;
    if (s < 0) s += kSecondsPerDay;
    return static_cast<int>(s);
}

namespace {

bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < len; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

} // namespace

EpochSeconds parse_iso8601(std::string_view text) {
    int year, month, day, hour, minute, second;
    const bool shape_ok = text.size() >= 19 && text[4] == '-' && text[7] == '-' &&
                          (text[10] == 'T' || text[10] == ' ') && text[13] == ':' &&
                          text[16] == ':';
    if (!shape_ok || !parse_fixed_int(text, 0, 4, year) || !parse_fixed_int(text, 5, 2, month) ||
        !parse_fixed_int(text, 8, 2, day) || !parse_fixed_int(text, 11, 2, hour) ||
        !parse_fixed_int(text, 14, 2, minute) || !parse_fixed_int(text, 17, 2, second)) {
        throw InputFormatError("bad ISO-8601 timestamp: '" + std::string(text) + "'");
    }
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos; // fractional seconds are truncated
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size()) {
        throw InputFormatError("trailing characters in timestamp: '" + std::string(text) + "'");
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        throw InputFormatError("out-of-range timestamp field: '" + std::string(text) + "'");
    }
    return epoch_from_civil(CivilDate{year, month, day}, hour, minute, second);
}

std::string format_iso8601(EpochSeconds t) {
    std::int64_t days = t / kSecondsPerDay;
    EpochSeconds rem = t % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        --days;
    }
    const CivilDate d = civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", d.year, d.month, d.day,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

std::string format_date(CivilDate d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

} // namespace airnet
