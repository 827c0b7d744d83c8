// Throughput comparison of the OpenMP kernels against their serial reference
// implementations: windowed aggregation, calibration apply, fix labeling.

#include "airnet/calibration.hpp"
#include "airnet/exposure.hpp"
#include "airnet/parallel.hpp"
#include "airnet/reference_kernels.hpp"
#include "airnet/rng.hpp"
#include "airnet/timeseries.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

namespace {

using namespace airnet;

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, std::size_t items, double serial_s, double parallel_s) {
    std::printf("%-22s %10zu items   serial %8.3f ms   openmp %8.3f ms   speedup %.2fx\n", name,
                items, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n = 2'000'000;
    if (argc > 1) n = std::stoull(argv[1]);
    std::printf("threads: %d\n", parallel_threads());

    Rng rng(7);

    // aggregate: n raw 10-s samples -> hourly
    std::vector<Sample> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        samples[i].timestamp = static_cast<EpochSeconds>(i) * 10;
        samples[i].pm25 = 50.0 + 30.0 * rng.next_double();
    }
    const TimeSeries raw = make_raw_series("bench", samples, 10);
    TimeSeries hourly_par, hourly_ser;
    const double agg_par = time_best_of(3, [&] { hourly_par = aggregate(raw, WindowLen::one_hour); });
    const double agg_ser = time_best_of(3, [&] { hourly_ser = ref::aggregate(raw, WindowLen::one_hour); });
    report("aggregate(1h)", n, agg_ser, agg_par);

    // apply: calibration over n windows
    TimeSeries wide = raw;
    cal::CalibrationModel model;
    model.form = cal::ModelForm::linear_free;
    model.beta0 = 1.8;
    model.beta1 = 0.68;
    TimeSeries out_par, out_ser;
    const double ap_par = time_best_of(3, [&] { out_par = cal::apply(model, wide); });
    const double ap_ser = time_best_of(3, [&] { out_ser = ref::apply(model, wide); });
    report("apply(model)", wide.windows.size(), ap_ser, ap_par);

    // label: geofence classification over n/10 windows x 8 fixes
    const std::size_t nw = n / 10;
    std::vector<exposure::PersonalWindow> pw(nw);
    std::vector<exposure::Geofence> fences = {
        {exposure::Microenv::home, 47.65, -122.30, 10.0},
        {exposure::Microenv::office, 47.656, -122.309, 10.0},
    };
    for (std::size_t i = 0; i < nw; ++i) {
        pw[i].start = static_cast<EpochSeconds>(i) * 600;
        pw[i].valid = true;
        pw[i].pm25 = 20.0;
        for (int f = 0; f < 8; ++f) {
            nmea::GpsFix fix;
            fix.valid = true;
            fix.latitude = 47.65 + (rng.next_double() - 0.5) * 2e-4;
            fix.longitude = -122.30 + (rng.next_double() - 0.5) * 2e-4;
            pw[i].fixes.push_back(fix);
        }
    }
    exposure::LabeledSeries lab_par, lab_ser;
    const double lb_par = time_best_of(3, [&] { lab_par = exposure::label_series(pw, fences); });
    const double lb_ser = time_best_of(3, [&] { lab_ser = ref::label_series(pw, fences); });
    report("label_series", nw, lb_ser, lb_par);

    // sanity: parallel and serial kernels must agree exactly
    bool same = hourly_par.windows.size() == hourly_ser.windows.size() &&
                out_par.windows.size() == out_ser.windows.size() &&
                lab_par.windows.size() == lab_ser.windows.size();
    for (std::size_t i = 0; same && i < hourly_par.windows.size(); ++i) {
        same = hourly_par.windows[i].mean_pm25 == hourly_ser.windows[i].mean_pm25;
    }
    std::printf("serial/openmp agreement: %s\n", same ? "bit-identical" : "MISMATCH");
    return same ? 0 : 1;
}
