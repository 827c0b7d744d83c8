#include "airnet/reference_kernels.hpp"

#include "airnet/errors.hpp"

#include <algorithm>
#include <array>

namespace airnet::ref {

namespace {

EpochSeconds floor_to(EpochSeconds t, std::int64_t w) {
    EpochSeconds q = t / w;
    if (t < 0 && t % w != 0) --q;
    return q * w;
}

} // namespace

TimeSeries aggregate(const TimeSeries& input, WindowLen target, const AggregateOptions& opts) {
    const std::int64_t target_s = window_seconds(target);
    if (target_s <= 0) throw PreconditionError("aggregate: target window must be 10min/1h/24h");
    const std::int64_t input_s =
        input.window_len == WindowLen::raw ? input.sample_period_s : window_seconds(input.window_len);
    if (input_s <= 0 || target_s % input_s != 0 || target_s == input_s) {
        throw PreconditionError("aggregate: target window must be a coarser multiple of the input");
    }

    TimeSeries out;
    out.node_id = input.node_id;
    out.window_len = target;
    out.sample_period_s = input.sample_period_s;
    if (input.windows.empty()) return out;

    std::vector<Window> sorted;
    const std::vector<Window>* src = &input.windows;
    if (!std::is_sorted(input.windows.begin(), input.windows.end(),
                        [](const Window& a, const Window& b) { return a.start < b.start; })) {
        sorted = input.windows;
        std::sort(sorted.begin(), sorted.end(), [](const Window& a, const Window& b) {
            if (a.start != b.start) return a.start < b.start;
            return a.mean_pm25 < b.mean_pm25;
        });
        src = &sorted;
    }

    const double expected = static_cast<double>(target_s) / static_cast<double>(input.sample_period_s);
    std::size_t i = 0;
    while (i < src->size()) {
        const EpochSeconds start = floor_to((*src)[i].start, target_s);
        double weighted_sum = 0.0;
        std::int64_t n = 0;
        std::size_t j = i;
        for (; j < src->size() && floor_to((*src)[j].start, target_s) == start; ++j) {
            if (!(*src)[j].valid) continue;
            weighted_sum += (*src)[j].mean_pm25 * static_cast<double>((*src)[j].n_samples);
            n += (*src)[j].n_samples;
        }
        Window o;
        o.start = start;
        o.n_samples = n;
        o.coverage = static_cast<double>(n) / expected;
        o.mean_pm25 = n > 0 ? weighted_sum / static_cast<double>(n) : 0.0;
        o.valid = n > 0 && o.coverage >= opts.min_coverage &&
                  o.coverage <= 1.0 + opts.coverage_tolerance;
        out.windows.push_back(o);
        i = j;
    }
    return out;
}

TimeSeries apply(const cal::CalibrationModel& model, const TimeSeries& series,
                 cal::ApplyStats* stats) {
    TimeSeries out = series;
    for (Window& w : out.windows) {
        double y = model.evaluate(w.mean_pm25);
        if (y < 0.0) {
            y = 0.0;
            if (stats) ++stats->clamped;
        }
        w.mean_pm25 = y;
    }
    return out;
}

exposure::LabeledSeries label_series(std::span<const exposure::PersonalWindow> windows,
                                     std::span<const exposure::Geofence> fences,
                                     const exposure::LabelOptions& opts) {
    using exposure::LabeledWindow;
    using exposure::Microenv;

    exposure::LabeledSeries out;
    out.windows.reserve(windows.size());
    for (const exposure::PersonalWindow& w : windows) {
        LabeledWindow lw;
        lw.start = w.start;
        lw.pm25 = w.pm25;
        lw.valid = w.valid;
        std::array<std::size_t, 3> votes{};
        for (const nmea::GpsFix& fix : w.fixes) {
            const auto label = exposure::classify_fix(fix, fences);
            if (!label) {
                ++out.invalid_fixes;
                continue;
            }
            ++votes[static_cast<std::size_t>(*label)];
        }
        const std::size_t most = std::max({votes[0], votes[1], votes[2]});
        if (most > 0) {
            for (std::size_t k = 0; k < votes.size(); ++k) {
                if (votes[k] == most) {
                    lw.label = static_cast<Microenv>(k);
                    break;
                }
            }
        }
        out.windows.push_back(lw);
    }

    std::optional<Microenv> last_label;
    EpochSeconds last_label_start = 0;
    for (LabeledWindow& lw : out.windows) {
        if (lw.label) {
            last_label = lw.label;
            last_label_start = lw.start;
            continue;
        }
        if (last_label && lw.start - last_label_start <= opts.carry_forward_limit_s) {
            lw.label = last_label;
            ++out.carried_forward;
        } else {
            ++out.unclassified;
        }
    }
    return out;
}

} // namespace airnet::ref
