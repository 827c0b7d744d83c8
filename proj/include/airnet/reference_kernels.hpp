#pragma once

#include "airnet/calibration.hpp"
#include "airnet/exposure.hpp"
#include "airnet/timeseries.hpp"

#include <span>

// Straight-line serial implementations of the kernels that run under OpenMP
// in the library proper. Tests assert bit-identical outputs against these;
// the bench tool compares throughput.
namespace airnet::ref {

TimeSeries aggregate(const TimeSeries& input, WindowLen target, const AggregateOptions& opts = {});

TimeSeries apply(const cal::CalibrationModel& model, const TimeSeries& series,
                 cal::ApplyStats* stats = nullptr);

exposure::LabeledSeries label_series(std::span<const exposure::PersonalWindow> windows,
                                     std::span<const exposure::Geofence> fences,
                                     const exposure::LabelOptions& opts = {});

} // namespace airnet::ref
