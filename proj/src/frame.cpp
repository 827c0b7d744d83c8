#include "airnet/frame.hpp"

namespace airnet::pms {

std::string_view to_string(FrameErrorKind kind) {
    switch (kind) {
        case FrameErrorKind::BadStartBytes: return "bad_start_bytes";
        case FrameErrorKind::BadLength: return "bad_length";
        case FrameErrorKind::BadChecksum: return "bad_checksum";
        case FrameErrorKind::Truncated: return "truncated";
        case FrameErrorKind::BadSentence: return "bad_sentence";
    }
    return "unknown";
}

namespace {

std::uint16_t read_word(std::span<const std::uint8_t> bytes, std::size_t pos) {
    return static_cast<std::uint16_t>(bytes[pos] << 8 | bytes[pos + 1]);
}

void write_word(std::span<std::uint8_t> bytes, std::size_t pos, std::uint16_t value) {
    bytes[pos] = static_cast<std::uint8_t>(value >> 8);
    bytes[pos + 1] = static_cast<std::uint8_t>(value & 0xFF);
}

} // namespace

std::uint16_t checksum(std::span<const std::uint8_t> head30) {
    std::uint32_t sum = 0;
    const std::size_t n = head30.size() < 30 ? head30.size() : 30;
    for (std::size_t i = 0; i < n; ++i) sum += head30[i];
    return static_cast<std::uint16_t>(sum & 0xFFFF);
}

FrameResult parse_frame(std::span<const std::uint8_t> bytes, std::size_t stream_offset) {
    if (bytes.size() < kFrameSize) {
        return FrameError{FrameErrorKind::Truncated, stream_offset};
    }
    if (bytes[0] != kStartByte0 || bytes[1] != kStartByte1) {
        return FrameError{FrameErrorKind::BadStartBytes, stream_offset};
    }
    if (read_word(bytes, 2) != kPayloadLength) {
        return FrameError{FrameErrorKind::BadLength, stream_offset};
    }
    if (checksum(bytes.first(30)) != read_word(bytes, 30)) {
        return FrameError{FrameErrorKind::BadChecksum, stream_offset};
    }
    SensorFrame f;
    f.pm1_std = read_word(bytes, 4);
    f.pm25_std = read_word(bytes, 6);
    f.pm10_std = read_word(bytes, 8);
    f.pm1_atm = read_word(bytes, 10);
    f.pm25_atm = read_word(bytes, 12);
    f.pm10_atm = read_word(bytes, 14);
    for (std::size_t i = 0; i < 6; ++i) f.counts[i] = read_word(bytes, 16 + 2 * i);
    f.status = read_word(bytes, 28);
    return f;
}

std::array<std::uint8_t, kFrameSize> encode_frame(const SensorFrame& frame) {
    std::array<std::uint8_t, kFrameSize> out{};
    out[0] = kStartByte0;
    out[1] = kStartByte1;
    write_word(out, 2, kPayloadLength);
    write_word(out, 4, frame.pm1_std);
    write_word(out, 6, frame.pm25_std);
    write_word(out, 8, frame.pm10_std);
    write_word(out, 10, frame.pm1_atm);
    write_word(out, 12, frame.pm25_atm);
    write_word(out, 14, frame.pm10_atm);
    for (std::size_t i = 0; i < 6; ++i) write_word(out, 16 + 2 * i, frame.counts[i]);
    write_word(out, 28, frame.status);
    write_word(out, 30, checksum(std::span<const std::uint8_t>(out.data(), 30)));
    return out;
}

std::vector<FrameResult> resync_and_parse(std::span<const std::uint8_t> stream) {
    std::vector<FrameResult> out;
    const std::size_t n = stream.size();
    std::size_t pos = 0;
    // Bytes inside an already-reported failed candidate are not re-reported
    // as garbage; everything else skipped between markers is.
    std::size_t covered_until = 0;
    std::size_t garbage_start = n; // n == no open garbage region

    auto flush_garbage = [&] {
        if (garbage_start < n) {
            out.push_back(FrameError{FrameErrorKind::BadStartBytes, garbage_start});
            garbage_start = n;
        }
    };

    while (pos < n) {
        const bool marker = pos + 1 < n && stream[pos] == kStartByte0 && stream[pos + 1] == kStartByte1;
        if (!marker) {
            if (pos >= covered_until && garbage_start == n) garbage_start = pos;
            ++pos;
            continue;
        }
        flush_garbage();
        if (pos + kFrameSize > n) {
            out.push_back(FrameError{FrameErrorKind::Truncated, pos});
            break;
        }
        FrameResult r = parse_frame(stream.subspan(pos, kFrameSize), pos);
        out.push_back(r);
        if (std::holds_alternative<SensorFrame>(r)) {
            pos += kFrameSize;
            covered_until = pos;
        } else {
            covered_until = pos + kFrameSize;
            ++pos;
        }
    }
    flush_garbage();
    return out;
}

} // namespace airnet::pms
