#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace airnet {

// All storage is UTC seconds since the Unix epoch. Local time enters only
// through a configured offset, used for day boundaries and display.
using EpochSeconds = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct CivilDate {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31

    friend bool operator==(const CivilDate&, const CivilDate&) = default;
    friend auto operator<=>(const CivilDate&, const CivilDate&) = default;
};

// Proleptic Gregorian day count (days since 1970-01-01).
std::int64_t days_from_civil(CivilDate d);
CivilDate civil_from_days(std::int64_t z);

EpochSeconds epoch_from_civil(CivilDate d, int hour, int minute, double second);

// Local calendar date of a UTC instant under a fixed offset.
CivilDate local_date(EpochSeconds t, int utc_offset_minutes);

// Seconds elapsed since local midnight.
int local_seconds_of_day(EpochSeconds t, int utc_offset_minutes);

// Accepts YYYY-MM-DDTHH:MM:SS with optional fractional seconds and optional
// trailing 'Z'. Throws InputFormatError on anything else.
EpochSeconds parse_iso8601(std::string_view text);

std::string format_iso8601(EpochSeconds t);
std::string format_date(CivilDate d); // YYYY-MM-DD

} // namespace airnet
