#pragma once

#include "airnet/frame.hpp"
#include "airnet/time.hpp"

#include <iosfwd>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace airnet::nmea {

struct GpsFix {
    EpochSeconds timestamp = 0; // UTC; GGA sentences take their date from context
    double latitude = 0.0;      // decimal degrees, north positive
    double longitude = 0.0;     // decimal degrees, east positive
    bool valid = false;
    std::optional<double> hdop; // horizontal accuracy metadata (GGA only)

    friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

// Sentence types other than RMC/GGA are skipped, which is not an error.
struct SkippedSentence {};

using SentenceResult = std::variant<GpsFix, SkippedSentence, pms::FrameError>;

// Parse one NMEA-0183 sentence (any talker, RMC or GGA). The XOR checksum
// between '$' and '*' is verified before any field is decoded. GGA carries
// no date, so `date_hint` (typically the last RMC date seen) anchors its
// time-of-day; without a hint the epoch date is used.
SentenceResult parse_sentence(std::string_view line, std::optional<CivilDate> date_hint = {});

struct LogStats {
    std::size_t fixes = 0;
    std::size_t skipped = 0;
    std::size_t errors = 0;
};

// Line-by-line log reader that threads RMC dates into subsequent GGA fixes.
std::vector<GpsFix> parse_log(std::istream& in, LogStats* stats = nullptr);

} // namespace airnet::nmea
