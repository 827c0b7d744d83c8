#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace airnet::pms {

inline constexpr std::size_t kFrameSize = 32;
inline constexpr std::uint8_t kStartByte0 = 0x42;
inline constexpr std::uint8_t kStartByte1 = 0x4D;
inline constexpr std::uint16_t kPayloadLength = 28; // length word after the start bytes

// One decoded 32-byte report from the PM sensor. Thirteen big-endian words:
// three CF=1 masses, three atmospheric masses, six cumulative-exceedance
// count bins, and the raw version/error word.
struct SensorFrame {
    std::uint16_t pm1_std = 0;
    std::uint16_t pm25_std = 0;
    std::uint16_t pm10_std = 0;
    std::uint16_t pm1_atm = 0;
    std::uint16_t pm25_atm = 0;
    std::uint16_t pm10_atm = 0;
    std::array<std::uint16_t, 6> counts{}; // per 0.1 L, diameters >0.3 ... >10 um
    std::uint16_t status = 0;

    // Count bins count everything above a threshold, so they must not increase
    // with diameter. Violations are flagged, not rejected: real sensors emit
    // them and they carry information.
    bool counts_monotonic() const {
        for (std::size_t i = 1; i < counts.size(); ++i)
            if (counts[i] > counts[i - 1]) return false;
        return true;
    }

    bool masses_ordered() const {
        return pm1_std <= pm25_std && pm25_std <= pm10_std && pm1_atm <= pm25_atm &&
               pm25_atm <= pm10_atm;
    }

    friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

enum class FrameErrorKind {
    BadStartBytes,
    BadLength,
    BadChecksum,
    Truncated,
    BadSentence, // NMEA side
};

std::string_view to_string(FrameErrorKind kind);

struct FrameError {
    FrameErrorKind kind;
    std::size_t offset = 0; // byte position in the originating stream

    friend bool operator==(const FrameError&, const FrameError&) = default;
};

using FrameResult = std::variant<SensorFrame, FrameError>;

// Arithmetic sum of the first 30 frame bytes, truncated to 16 bits.
std::uint16_t checksum(std::span<const std::uint8_t> head30);

// Decode one exactly-32-byte candidate. The checksum is verified before any
// field is returned. `stream_offset` seeds the error offset for stream use.
FrameResult parse_frame(std::span<const std::uint8_t> bytes, std::size_t stream_offset = 0);

std::array<std::uint8_t, kFrameSize> encode_frame(const SensorFrame& frame);

// Scan an arbitrary byte stream for start markers, parsing a frame at each
// candidate. A failed candidate consumes one byte, so the scan is O(n) and
// never loses a complete valid frame. Contiguous unreported garbage becomes
// one BadStartBytes record; a partial trailing frame becomes Truncated.
std::vector<FrameResult> resync_and_parse(std::span<const std::uint8_t> stream);

} // namespace airnet::pms
