#include "airnet/nmea.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <string>

namespace airnet::nmea {

namespace {

using pms::FrameError;
using pms::FrameErrorKind;

FrameError bad(std::size_t offset) { return FrameError{FrameErrorKind::BadSentence, offset}; }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::vector<std::string_view> split_fields(std::string_view body) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == ',') {
            fields.push_back(body.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

bool parse_double_field(std::string_view f, double& out) {
    const char* begin = f.data();
    const char* end = begin + f.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

// ddmm.mmmm (lat) / dddmm.mmmm (lon) plus hemisphere letter.
bool parse_coordinate(std::string_view f, std::string_view hemi, bool is_longitude, double& out) {
    const std::size_t deg_digits = is_longitude ? 3 : 2;
    if (f.size() < deg_digits + 2) return false;
    double raw;
    if (!parse_double_field(f, raw)) return false;
    int degrees = 0;
    for (std::size_t i = 0; i < deg_digits; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(f[i]))) return false;
        degrees = degrees * 10 + (f[i] - '0');
    }
    const double minutes = raw - degrees * 100.0;
    if (minutes < 0.0 || minutes >= 60.0) return false;
    double value = degrees + minutes / 60.0;
    if (hemi == "S" || hemi == "W") {
        value = -value;
    } else if (hemi != "N" && hemi != "E") {
        return false;
    }
    const double limit = is_longitude ? 180.0 : 90.0;
    if (value < -limit || value > limit) return false;
    out = value;
    return true;
}

// hhmmss or hhmmss.sss -> seconds since midnight (fraction truncated)
bool parse_utc_time(std::string_view f, int& seconds_of_day) {
    if (f.size() < 6) return false;
    for (std::size_t i = 0; i < 6; ++i)
        if (!std::isdigit(static_cast<unsigned char>(f[i]))) return false;
    const int hh = (f[0] - '0') * 10 + (f[1] - '0');
    const int mm = (f[2] - '0') * 10 + (f[3] - '0');
    const int ss = (f[4] - '0') * 10 + (f[5] - '0');
    if (hh > 23 || mm > 59 || ss > 60) return false;
    seconds_of_day = hh * 3600 + mm * 60 + ss;
    return true;
}

bool parse_rmc_date(std::string_view f, CivilDate& out) {
    if (f.size() != 6) return false;
    for (char c : f)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    const int dd = (f[0] - '0') * 10 + (f[1] - '0');
    const int mm = (f[2] - '0') * 10 + (f[3] - '0');
    const int yy = (f[4] - '0') * 10 + (f[5] - '0');
    if (dd < 1 || dd > 31 || mm < 1 || mm > 12) return false;
    // two-digit year pivot: 80..99 -> 1980..1999
    out = CivilDate{(yy >= 80 ? 1900 : 2000) + yy, mm, dd};
    return true;
}

} // namespace

SentenceResult parse_sentence(std::string_view line, std::optional<CivilDate> date_hint) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    if (line.empty() || line[0] != '$') return bad(0);

    const std::size_t star = line.rfind('*');
    if (star == std::string_view::npos || star + 3 != line.size()) return bad(line.size());
    const int hi = hex_value(line[star + 1]);
    const int lo = hex_value(line[star + 2]);
    if (hi < 0 || lo < 0) return bad(star + 1);
    std::uint8_t want = static_cast<std::uint8_t>(hi << 4 | lo);
    std::uint8_t got = 0;
    for (std::size_t i = 1; i < star; ++i) got ^= static_cast<std::uint8_t>(line[i]);
    if (got != want) return bad(star);

    const std::string_view body = line.substr(1, star - 1);
    const auto fields = split_fields(body);
    if (fields.empty() || fields[0].size() < 3) return bad(1);
    const std::string_view type = fields[0].substr(fields[0].size() - 3);
    if (type != "RMC" && type != "GGA") return SkippedSentence{};

    GpsFix fix;
    int seconds_of_day = 0;
    CivilDate date = date_hint.value_or(CivilDate{1970, 1, 1});

    if (type == "RMC") {
        // $xxRMC,time,status,lat,N,lon,E,speed,course,date,...
        if (fields.size() < 10) return bad(1);
        if (!parse_utc_time(fields[1], seconds_of_day)) return bad(1);
        if (fields[2] == "A") {
            fix.valid = true;
        } else if (fields[2] == "V") {
            fix.valid = false;
        } else {
            return bad(1);
        }
        if (fix.valid || !fields[3].empty()) {
            if (!parse_coordinate(fields[3], fields[4], false, fix.latitude)) return bad(1);
            if (!parse_coordinate(fields[5], fields[6], true, fix.longitude)) return bad(1);
        }
        if (!fields[9].empty() && !parse_rmc_date(fields[9], date)) return bad(1);
    } else {
        // $xxGGA,time,lat,N,lon,E,quality,numsat,hdop,alt,...
        if (fields.size() < 9) return bad(1);
        if (!parse_utc_time(fields[1], seconds_of_day)) return bad(1);
        double quality;
        if (!parse_double_field(fields[6], quality)) return bad(1);
        fix.valid = quality > 0.0;
        if (fix.valid || !fields[2].empty()) {
            if (!parse_coordinate(fields[2], fields[3], false, fix.latitude)) return bad(1);
            if (!parse_coordinate(fields[4], fields[5], true, fix.longitude)) return bad(1);
        }
        if (!fields[8].empty()) {
            double hdop;
            if (!parse_double_field(fields[8], hdop)) return bad(1);
            fix.hdop = hdop;
        }
    }
    fix.timestamp = epoch_from_civil(date, 0, 0, 0) + seconds_of_day;
    return fix;
}

std::vector<GpsFix> parse_log(std::istream& in, LogStats* stats) {
    std::vector<GpsFix> fixes;
    std::optional<CivilDate> last_rmc_date;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        SentenceResult r = parse_sentence(line, last_rmc_date);
        if (const GpsFix* fix = std::get_if<GpsFix>(&r)) {
            // Only RMC sentences carry a date; remember it for following GGAs.
            const std::size_t comma = line.find(',');
            if (comma != std::string::npos && comma >= 3 && line.compare(comma - 3, 3, "RMC") == 0) {
                last_rmc_date = local_date(fix->timestamp, 0);
            }
            fixes.push_back(*fix);
            if (stats) ++stats->fixes;
        } else if (std::holds_alternative<SkippedSentence>(r)) {
            if (stats) ++stats->skipped;
        } else {
            if (stats) ++stats->errors;
        }
    }
    return fixes;
}

} // namespace airnet::nmea
