#include "airnet/timeseries.hpp"

#include "airnet/errors.hpp"
#include "airnet/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace airnet {

std::string_view to_string(LocationClass c) {
    switch (c) {
        case LocationClass::indoor: return "indoor";
        case LocationClass::outdoor: return "outdoor";
        case LocationClass::personal: return "personal";
        case LocationClass::reference: return "reference";
    }
    return "unknown";
}

std::optional<LocationClass> location_class_from_string(std::string_view s) {
    if (s == "indoor") return LocationClass::indoor;
    if (s == "outdoor") return LocationClass::outdoor;
    if (s == "personal") return LocationClass::personal;
    if (s == "reference") return LocationClass::reference;
    return std::nullopt;
}

std::int64_t window_seconds(WindowLen len) {
    switch (len) {
        case WindowLen::raw: return 0;
        case WindowLen::ten_min: return 600;
        case WindowLen::one_hour: return 3600;
        case WindowLen::one_day: return 86400;
    }
    return 0;
}

std::string_view to_string(WindowLen len) {
    switch (len) {
        case WindowLen::raw: return "raw";
        case WindowLen::ten_min: return "10min";
        case WindowLen::one_hour: return "1h";
        case WindowLen::one_day: return "24h";
    }
    return "unknown";
}

std::size_t TimeSeries::valid_count() const {
    std::size_t n = 0;
    for (const Window& w : windows) n += w.valid;
    return n;
}

std::optional<double> TimeSeries::mean_of_valid(EpochSeconds from, EpochSeconds to) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Window& w : windows) {
        if (!w.valid || w.start < from || w.start >= to) continue;
        sum += w.mean_pm25;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> TimeSeries::max_of_valid(EpochSeconds from, EpochSeconds to) const {
    std::optional<double> best;
    for (const Window& w : windows) {
        if (!w.valid || w.start < from || w.start >= to) continue;
        if (!best || w.mean_pm25 > *best) best = w.mean_pm25;
    }
    return best;
}

TimeSeries make_raw_series(std::string node_id, std::span<const Sample> samples,
                           std::int64_t sample_period_s) {
    TimeSeries s;
    s.node_id = std::move(node_id);
    s.window_len = WindowLen::raw;
    s.sample_period_s = sample_period_s;
    s.windows.reserve(samples.size());
    for (const Sample& sm : samples) {
        s.windows.push_back(Window{sm.timestamp, sm.pm25, 1.0, 1, true});
    }
    std::sort(s.windows.begin(), s.windows.end(), [](const Window& a, const Window& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.mean_pm25 < b.mean_pm25;
    });
    return s;
}

namespace {

EpochSeconds floor_to(EpochSeconds t, std::int64_t w) {
    EpochSeconds q = t / w;
    if (t < 0 && t % w != 0) --q;
    return q * w;
}

struct Bucket {
    EpochSeconds start;
    std::size_t first; // index range into the input window vector
    std::size_t last;  // exclusive
};

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

    // Group contiguous runs falling into the same target window.
    std::vector<Bucket> buckets;
    for (std::size_t i = 0; i < src->size();) {
        const EpochSeconds start = floor_to((*src)[i].start, target_s);
        std::size_t j = i + 1;
        while (j < src->size() && floor_to((*src)[j].start, target_s) == start) ++j;
        buckets.push_back(Bucket{start, i, j});
        i = j;
    }

    const double expected = static_cast<double>(target_s) / static_cast<double>(input.sample_period_s);
    out.windows.resize(buckets.size());
    parallel_for(static_cast<std::int64_t>(buckets.size()), [&](std::int64_t bi) {
        const Bucket& b = buckets[static_cast<std::size_t>(bi)];
        double weighted_sum = 0.0;
        std::int64_t n = 0;
        for (std::size_t k = b.first; k < b.last; ++k) {
            const Window& w = (*src)[k];
            if (!w.valid) continue; // invalid windows propagate as absent
            weighted_sum += w.mean_pm25 * static_cast<double>(w.n_samples);
            n += w.n_samples;
        }
        Window o;
        o.start = b.start;
        o.n_samples = n;
        o.coverage = static_cast<double>(n) / expected;
        o.mean_pm25 = n > 0 ? weighted_sum / static_cast<double>(n) : 0.0;
        o.valid = n > 0 && o.coverage >= opts.min_coverage &&
                  o.coverage <= 1.0 + opts.coverage_tolerance;
        out.windows[static_cast<std::size_t>(bi)] = o;
    });
    return out;
}

AlignResult align_pairs(const TimeSeries& a, const TimeSeries& b) {
    if (a.window_len != b.window_len) {
        throw PreconditionError("align_pairs: series have different window lengths");
    }
    AlignResult r;
    std::size_t ia = 0, ib = 0;
    while (ia < a.windows.size() && ib < b.windows.size()) {
        const Window& wa = a.windows[ia];
        const Window& wb = b.windows[ib];
        if (!wa.valid) {
            ++ia;
            continue;
        }
        if (!wb.valid) {
            ++ib;
            continue;
        }
        if (wa.start < wb.start) {
            ++r.dropped_a;
            ++ia;
        } else if (wb.start < wa.start) {
            ++r.dropped_b;
            ++ib;
        } else {
            r.pairs.push_back(AlignedPair{wa.start, wa.mean_pm25, wb.mean_pm25});
            ++ia;
            ++ib;
        }
    }
    for (; ia < a.windows.size(); ++ia) r.dropped_a += a.windows[ia].valid;
    for (; ib < b.windows.size(); ++ib) r.dropped_b += b.windows[ib].valid;
    return r;
}

TimeSeries reference_mean(std::span<const TimeSeries> monitors, int min_monitors) {
    if (monitors.empty()) throw PreconditionError("reference_mean: no reference monitors");
    for (const TimeSeries& m : monitors) {
        if (m.window_len != WindowLen::one_hour) {
            throw PreconditionError("reference_mean: reference series must be hourly");
        }
    }

    std::vector<EpochSeconds> starts;
    for (const TimeSeries& m : monitors) {
        for (const Window& w : m.windows) {
            if (w.valid) starts.push_back(w.start);
        }
    }
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    TimeSeries out;
    out.node_id = "reference_mean";
    out.window_len = WindowLen::one_hour;
    out.sample_period_s = 3600;
    out.windows.reserve(starts.size());
    for (EpochSeconds t : starts) {
        double sum = 0.0;
        int n = 0;
        for (const TimeSeries& m : monitors) {
            auto it = std::lower_bound(
                m.windows.begin(), m.windows.end(), t,
                [](const Window& w, EpochSeconds v) { return w.start < v; });
            if (it != m.windows.end() && it->start == t && it->valid) {
                sum += it->mean_pm25;
                ++n;
            }
        }
        Window w;
        w.start = t;
        w.n_samples = n;
        w.mean_pm25 = n > 0 ? sum / n : 0.0;
        w.coverage = static_cast<double>(n) / static_cast<double>(monitors.size());
        w.valid = n >= min_monitors;
        out.windows.push_back(w);
    }
    return out;
}

} // namespace airnet
