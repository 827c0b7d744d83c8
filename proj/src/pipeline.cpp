#include "airnet/pipeline.hpp"

#include "airnet/analytics.hpp"
#include "airnet/calibration.hpp"
#include "airnet/csv.hpp"
#include "airnet/errors.hpp"
#include "airnet/exposure.hpp"
#include "airnet/timeseries.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace airnet::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kStageVersion = "1";

// Removes everything a failing stage already wrote.
class StageGuard {
public:
    explicit StageGuard(std::string stage) : stage_(std::move(stage)) {}

    ~StageGuard() {
        if (committed_) return;
        for (const fs::path& p : created_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

    fs::path track(fs::path p) {
        created_.push_back(p);
        return p;
    }

    StageResult commit(std::map<std::string, std::int64_t> counters) {
        committed_ = true;
        StageResult r;
        r.name = stage_;
        r.counters = std::move(counters);
        r.outputs = created_;
        return r;
    }

private:
    std::string stage_;
    std::vector<fs::path> created_;
    bool committed_ = false;
};

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const InputFormatError*>(&e)) return 2;
    if (dynamic_cast<const ConfigError*>(&e)) return 3;
    if (dynamic_cast<const FitError*>(&e)) return 4;
    if (dynamic_cast<const PreconditionError*>(&e)) return 4;
    return 1;
}

template <class Fn>
StageResult guarded(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what(), exit_code_for(e));
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputFormatError("cannot open for writing: " + path.string());
    return out;
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv::fmt_double(*v) : std::string{};
}

// Samples grouped per node, ordered map for reproducible iteration.
std::map<std::string, std::vector<Sample>> group_by_node(std::vector<Sample> samples) {
    std::map<std::string, std::vector<Sample>> by_node;
    for (Sample& s : samples) by_node[s.node_id].push_back(std::move(s));
    return by_node;
}

cal::CalibrationModel load_model(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputFormatError("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputFormatError(path.string() + ": " + e.what());
    }
    cal::CalibrationModel m;
    const auto form = cal::form_from_string(j.at("form").get<std::string>());
    if (!form) throw InputFormatError(path.string() + ": unknown model form");
    m.form = *form;
    m.beta0 = j.at("beta0").get<double>();
    m.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2") && !j.at("beta2").is_null()) m.beta2 = j.at("beta2").get<double>();
    m.n = j.at("n").get<std::size_t>();
    m.rmse = j.at("rmse").get<double>();
    m.bic = j.at("bic").get<double>();
    if (j.contains("r2") && !j.at("r2").is_null()) m.r2 = j.at("r2").get<double>();
    return m;
}

struct HourlyBundle {
    // calibrated hourly series for every node seen in windowed.csv
    std::map<std::string, TimeSeries> by_node;
    std::map<std::string, LocationClass> node_class;
    std::int64_t clamped = 0;
};

HourlyBundle hourly_calibrated(const cfg::RunConfig& rc, const fs::path& windowed_csv,
                               const cal::CalibrationModel& model) {
    HourlyBundle b;
    auto by_node = group_by_node(csv::read_samples(windowed_csv));
    for (auto& [node, samples] : by_node) {
        b.node_class[node] = samples.front().location_class;
        const TimeSeries raw = make_raw_series(node, samples, rc.sample_period_s);
        const TimeSeries hourly =
            aggregate(raw, WindowLen::one_hour, AggregateOptions{rc.min_coverage, 0.05});
        cal::ApplyStats st;
        b.by_node[node] = cal::apply(model, hourly, &st);
        b.clamped += static_cast<std::int64_t>(st.clamped);
    }
    return b;
}

TimeSeries load_reference_mean(const cfg::RunConfig& rc, const fs::path& stage_dir) {
    const auto rows = csv::read_reference(stage_dir / "reference_windowed.csv");
    const auto series = csv::reference_series(rows);
    return reference_mean(series, rc.min_monitors);
}

bool is_night(const cfg::RunConfig& rc, EpochSeconds t) {
    const int hour = local_seconds_of_day(t, rc.utc_offset_minutes) / 3600;
    if (rc.night_start_hour <= rc.night_end_hour) {
        return hour >= rc.night_start_hour && hour < rc.night_end_hour;
    }
    return hour >= rc.night_start_hour || hour < rc.night_end_hour;
}

nlohmann::json wilcoxon_json(const stats::WilcoxonResult& w) {
    return {
        {"n_nonzero", w.n_nonzero},
        {"w_plus", w.w_plus},
        {"w_minus", w.w_minus},
        {"statistic", w.statistic},
        {"p_value", w.p_value},
        {"method", w.method == stats::WilcoxonMethod::exact ? "exact" : "normal_approx"},
        {"degenerate", w.degenerate},
    };
}

} // namespace

StageResult run_ingest(const cfg::RunConfig& rc, const fs::path& input_dir,
                       const fs::path& out_dir) {
    return guarded("ingest", [&] {
        StageGuard guard("ingest");
        fs::create_directories(out_dir);

        std::vector<Sample> samples = csv::read_samples(input_dir / "samples.csv");
        std::map<std::string, std::int64_t> c;
        c["rows_in"] = static_cast<std::int64_t>(samples.size());
        c["dropped_out_of_window"] = 0;
        c["dropped_unregistered_node"] = 0;

        std::vector<Sample> kept;
        kept.reserve(samples.size());
        for (Sample& s : samples) {
            if (s.timestamp < rc.study_start || s.timestamp >= rc.study_end) {
                ++c["dropped_out_of_window"];
                continue;
            }
            if (!rc.node_registered(s.node_id)) {
                ++c["dropped_unregistered_node"];
                continue;
            }
            kept.push_back(std::move(s));
        }
        std::sort(kept.begin(), kept.end(), [](const Sample& a, const Sample& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            if (a.node_id != b.node_id) return a.node_id < b.node_id;
            return a.pm25 < b.pm25;
        });
        c["rows_kept"] = static_cast<std::int64_t>(kept.size());
        csv::write_samples(guard.track(out_dir / "windowed.csv"), kept);

        std::vector<csv::ReferenceRow> refs = csv::read_reference(input_dir / "reference.csv");
        std::vector<csv::ReferenceRow> ref_kept;
        c["reference_rows_in"] = static_cast<std::int64_t>(refs.size());
        for (csv::ReferenceRow& r : refs) {
            if (r.timestamp < rc.study_start || r.timestamp >= rc.study_end) continue;
            ref_kept.push_back(std::move(r));
        }
        std::sort(ref_kept.begin(), ref_kept.end(),
                  [](const csv::ReferenceRow& a, const csv::ReferenceRow& b) {
                      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                      return a.monitor_id < b.monitor_id;
                  });
        c["reference_rows_kept"] = static_cast<std::int64_t>(ref_kept.size());
        csv::write_reference(guard.track(out_dir / "reference_windowed.csv"), ref_kept);
        return guard.commit(std::move(c));
    });
}

StageResult run_calibrate(const cfg::RunConfig& rc, const fs::path& stage_dir,
                          const fs::path& out_dir) {
    return guarded("calibrate", [&] {
        StageGuard guard("calibrate");
        fs::create_directories(out_dir);

        auto by_node = group_by_node(csv::read_samples(stage_dir / "windowed.csv"));
        auto it = by_node.find(rc.calibration_node);
        if (it == by_node.end() || it->second.empty()) {
            throw FitError("no data for calibration node '" + rc.calibration_node + "'");
        }
        const TimeSeries raw = make_raw_series(rc.calibration_node, it->second, rc.sample_period_s);
        const TimeSeries hourly =
            aggregate(raw, WindowLen::one_hour, AggregateOptions{rc.min_coverage, 0.05});
        const TimeSeries ref = load_reference_mean(rc, stage_dir);
        const AlignResult joined = align_pairs(hourly, ref);

        cal::CalibrationModel best = cal::select_model(joined.pairs);

        // identity mapping = the uncorrected sensor
        cal::CalibrationModel identity;
        identity.form = cal::ModelForm::linear_free;
        identity.beta0 = 0.0;
        identity.beta1 = 1.0;
        const cal::Metrics pre = cal::metrics(identity, joined.pairs);
        const cal::Metrics post = cal::metrics(best, joined.pairs);

        nlohmann::json model_doc = {
            {"form", std::string(cal::to_string(best.form))},
            {"beta0", best.beta0},
            {"beta1", best.beta1},
            {"beta2", cal::is_quadratic(best.form) ? nlohmann::json(best.beta2) : nlohmann::json()},
            {"n", best.n},
            {"r2", best.r2 ? nlohmann::json(*best.r2) : nlohmann::json()},
            {"rmse", best.rmse},
            {"bic", best.bic},
            {"training_node", rc.calibration_node},
            {"train_start", format_iso8601(rc.study_start)},
            {"train_end", format_iso8601(rc.study_end)},
        };
        {
            std::ofstream out = open_out(guard.track(out_dir / "model.json"));
            out << model_doc.dump(2) << '\n';
        }

        nlohmann::json candidates = nlohmann::json::array();
        for (cal::ModelForm form : cal::kAllForms) {
            nlohmann::json cj;
            cj["form"] = std::string(cal::to_string(form));
            try {
                const cal::CalibrationModel m = cal::fit(joined.pairs, form);
                cj["beta0"] = m.beta0;
                cj["beta1"] = m.beta1;
                if (cal::is_quadratic(form)) cj["beta2"] = m.beta2;
                cj["rmse"] = m.rmse;
                cj["bic"] = m.bic;
                cj["r2"] = m.r2 ? nlohmann::json(*m.r2) : nlohmann::json();
            } catch (const FitError& e) {
                cj["error"] = e.what();
            }
            candidates.push_back(std::move(cj));
        }
        // the raw sensor-vs-reference agreement, before any correction
        std::vector<double> xs, ys;
        for (const AlignedPair& p : joined.pairs) {
            xs.push_back(p.a);
            ys.push_back(p.b);
        }
        const std::optional<double> raw_r = stats::correlation(xs, ys);

        nlohmann::json report = {
            {"training_node", rc.calibration_node},
            {"pairs", joined.pairs.size()},
            {"dropped_sensor_hours", joined.dropped_a},
            {"dropped_reference_hours", joined.dropped_b},
            {"selected_form", std::string(cal::to_string(best.form))},
            {"pre_rmse", pre.rmse},
            {"post_rmse", post.rmse},
            {"pre_r2", pre.r2 ? nlohmann::json(*pre.r2) : nlohmann::json()},
            {"post_r2", post.r2 ? nlohmann::json(*post.r2) : nlohmann::json()},
            {"raw_pearson_r2", raw_r ? nlohmann::json(*raw_r * *raw_r) : nlohmann::json()},
            {"candidates", std::move(candidates)},
        };
        {
            std::ofstream out = open_out(guard.track(out_dir / "fit_report.json"));
            out << report.dump(2) << '\n';
        }

        std::map<std::string, std::int64_t> c;
        c["pairs"] = static_cast<std::int64_t>(joined.pairs.size());
        c["dropped_sensor_hours"] = static_cast<std::int64_t>(joined.dropped_a);
        c["dropped_reference_hours"] = static_cast<std::int64_t>(joined.dropped_b);
        return guard.commit(std::move(c));
    });
}

StageResult run_analyze(const cfg::RunConfig& rc, const fs::path& stage_dir,
                        const fs::path& out_dir) {
    return guarded("analyze", [&] {
        StageGuard guard("analyze");
        fs::create_directories(out_dir);

        const cal::CalibrationModel model = load_model(stage_dir / "model.json");
        HourlyBundle bundle = hourly_calibrated(rc, stage_dir / "windowed.csv", model);
        const TimeSeries ref = load_reference_mean(rc, stage_dir);

        std::map<std::string, std::int64_t> c;
        c["clamped_predictions"] = bundle.clamped;
        c["skipped_nonpositive_outdoor_hours"] = 0;

        auto series_of = [&](const std::string& node) -> const TimeSeries* {
            auto it = bundle.by_node.find(node);
            return it == bundle.by_node.end() ? nullptr : &it->second;
        };

        // table2.csv + io_hourly.csv
        std::ofstream table2 = open_out(guard.track(out_dir / "table2.csv"));
        table2 << "location_id,indoor_mean,indoor_max,outdoor_mean,outdoor_max,"
                  "io_min,io_median,io_mean,io_max,reduction_pct\n";
        std::ofstream io_csv = open_out(guard.track(out_dir / "io_hourly.csv"));
        io_csv << "timestamp_utc,location_id,io_ratio\n";

        std::map<std::string, stats::IoRatioSeries> io_by_site;
        for (const cfg::SiteConfig& site : rc.sites) {
            const TimeSeries* indoor = series_of(site.indoor_node);
            const TimeSeries* outdoor = series_of(site.outdoor_node);
            stats::SiteRow row;
            row.location_id = site.id;
            if (indoor && outdoor) {
                row = stats::site_summary_row(site.id, *indoor, *outdoor, rc.study_start,
                                              rc.study_end);
            } else if (indoor) {
                row.indoor_mean = indoor->mean_of_valid(rc.study_start, rc.study_end);
                row.indoor_max = indoor->max_of_valid(rc.study_start, rc.study_end);
            } else if (outdoor) {
                row.outdoor_mean = outdoor->mean_of_valid(rc.study_start, rc.study_end);
                row.outdoor_max = outdoor->max_of_valid(rc.study_start, rc.study_end);
            }
            table2 << row.location_id << ',' << opt_cell(row.indoor_mean) << ','
                   << opt_cell(row.indoor_max) << ',' << opt_cell(row.outdoor_mean) << ','
                   << opt_cell(row.outdoor_max) << ',';
            if (row.io) {
                table2 << csv::fmt_double(row.io->min) << ',' << csv::fmt_double(row.io->median)
                       << ',' << csv::fmt_double(row.io->mean) << ','
                       << csv::fmt_double(row.io->max);
            } else {
                table2 << ",,,";
            }
            table2 << ',' << opt_cell(row.reduction_pct) << '\n';

            if (indoor && outdoor) {
                stats::IoRatioSeries io = stats::io_ratio(*indoor, *outdoor, site.id);
                c["skipped_nonpositive_outdoor_hours"] +=
                    static_cast<std::int64_t>(io.skipped_nonpositive_outdoor);
                for (const stats::IoRatioPoint& p : io.points) {
                    io_csv << format_iso8601(p.start) << ',' << site.id << ','
                           << csv::fmt_double(p.ratio) << '\n';
                }
                io_by_site.emplace(site.id, std::move(io));
            }
        }

        // network_avg.csv, grouped the way Figure 2 groups streams
        std::ofstream na = open_out(guard.track(out_dir / "network_avg.csv"));
        na << "timestamp_utc,group,mean,sigma,n_sensors\n";
        std::map<std::string, std::vector<TimeSeries>> groups;
        std::set<std::string> outdoor_seen;
        for (const cfg::SiteConfig& site : rc.sites) {
            if (const TimeSeries* in = series_of(site.indoor_node)) {
                groups[site.hepa ? "hepa_indoor" : "nonhepa_indoor"].push_back(*in);
            }
            if (outdoor_seen.insert(site.outdoor_node).second) {
                if (const TimeSeries* out = series_of(site.outdoor_node)) {
                    groups["outdoor"].push_back(*out);
                }
            }
        }
        groups["reference"].push_back(ref);
        for (const auto& [name, members] : groups) {
            for (const stats::NetworkPoint& p : stats::network_average(members)) {
                if (p.start < rc.study_start || p.start >= rc.study_end) continue;
                na << format_iso8601(p.start) << ',' << name << ',' << csv::fmt_double(p.mean)
                   << ',' << (p.sigma ? csv::fmt_double(*p.sigma) : std::string{}) << ','
                   << p.n_sensors << '\n';
            }
        }

        // wilcoxon.json: I/O during the smoke episode vs after it
        nlohmann::json wj;
        if (rc.wilcoxon_during && rc.wilcoxon_post) {
            wj["during"] = format_iso8601(rc.wilcoxon_during->first) + "/" +
                           format_iso8601(rc.wilcoxon_during->second);
            wj["post"] = format_iso8601(rc.wilcoxon_post->first) + "/" +
                         format_iso8601(rc.wilcoxon_post->second);

            auto hod_means = [&](const stats::IoRatioSeries& io, EpochSeconds from,
                                 EpochSeconds to) {
                std::map<int, std::pair<double, int>> acc;
                for (const stats::IoRatioPoint& p : io.points) {
                    if (p.start < from || p.start >= to) continue;
                    const int hod = local_seconds_of_day(p.start, rc.utc_offset_minutes) / 3600;
                    acc[hod].first += p.ratio;
                    acc[hod].second += 1;
                }
                std::map<int, double> means;
                for (const auto& [hod, sn] : acc) means[hod] = sn.first / sn.second;
                return means;
            };

            nlohmann::json sites_json = nlohmann::json::object();
            std::vector<double> during_medians, post_medians;
            for (const auto& [site_id, io] : io_by_site) {
                const auto during = hod_means(io, rc.wilcoxon_during->first, rc.wilcoxon_during->second);
                const auto post = hod_means(io, rc.wilcoxon_post->first, rc.wilcoxon_post->second);
                std::vector<double> x, y;
                for (const auto& [hod, m] : during) {
                    auto it = post.find(hod);
                    if (it == post.end()) continue;
                    x.push_back(m);
                    y.push_back(it->second);
                }
                nlohmann::json sj;
                sj["paired_hours_of_day"] = x.size();
                if (!x.empty()) sj["test"] = wilcoxon_json(stats::wilcoxon_signed_rank(x, y));
                sites_json[site_id] = std::move(sj);

                std::vector<double> dv, pv;
                for (const stats::IoRatioPoint& p : io.points) {
                    if (p.start >= rc.wilcoxon_during->first && p.start < rc.wilcoxon_during->second)
                        dv.push_back(p.ratio);
                    if (p.start >= rc.wilcoxon_post->first && p.start < rc.wilcoxon_post->second)
                        pv.push_back(p.ratio);
                }
                const auto ds = stats::summarize(std::move(dv));
                const auto ps = stats::summarize(std::move(pv));
                if (ds && ps) {
                    during_medians.push_back(ds->median);
                    post_medians.push_back(ps->median);
                }
            }
            wj["sites"] = std::move(sites_json);
            if (!during_medians.empty()) {
                wj["network_site_medians"] =
                    wilcoxon_json(stats::wilcoxon_signed_rank(during_medians, post_medians));
            }
        } else {
            wj["note"] = "wilcoxon windows not configured";
        }
        {
            std::ofstream out = open_out(guard.track(out_dir / "wilcoxon.json"));
            out << wj.dump(2) << '\n';
        }

        c["sites"] = static_cast<std::int64_t>(rc.sites.size());
        c["io_sites"] = static_cast<std::int64_t>(io_by_site.size());
        return guard.commit(std::move(c));
    });
}

StageResult run_attribute(const cfg::RunConfig& rc, const fs::path& stage_dir,
                          const fs::path& out_dir) {
    return guarded("attribute", [&] {
        StageGuard guard("attribute");
        fs::create_directories(out_dir);
        if (!rc.personal) throw ConfigError("attribute requires a [personal] section");

        const cal::CalibrationModel model = load_model(stage_dir / "model.json");
        auto by_node = group_by_node(csv::read_samples(stage_dir / "windowed.csv"));
        auto it = by_node.find(rc.personal->node);
        if (it == by_node.end() || it->second.empty()) {
            throw InputFormatError("no data for personal node '" + rc.personal->node + "'");
        }

        std::vector<exposure::PersonalWindow> windows =
            exposure::build_personal_windows(it->second, rc.sample_period_s, rc.min_coverage);
        std::int64_t clamped = 0;
        for (exposure::PersonalWindow& w : windows) {
            double y = model.evaluate(w.pm25);
            if (y < 0.0) {
                y = 0.0;
                ++clamped;
            }
            w.pm25 = y;
        }

        exposure::LabelOptions lo;
        lo.carry_forward_limit_s = rc.gap_carry_forward_s;
        const exposure::LabeledSeries labeled = exposure::label_series(windows, rc.fences, lo);
        const std::vector<exposure::DailyAttribution> days =
            exposure::attribute_all_days(labeled.windows, rc.utc_offset_minutes);

        std::ofstream att = open_out(guard.track(out_dir / "attribution.csv"));
        att << "date,label,c_mean,f_fraction,ac,total_day\n";
        for (const exposure::DailyAttribution& d : days) {
            for (std::size_t k = 0; k < d.env.size(); ++k) {
                const exposure::EnvAttribution& e = d.env[k];
                att << format_date(d.day) << ','
                    << exposure::to_string(static_cast<exposure::Microenv>(k)) << ','
                    << (e.windows > 0 ? csv::fmt_double(e.c_mean) : std::string{}) << ','
                    << csv::fmt_double(e.f_fraction) << ',' << csv::fmt_double(e.ac) << ','
                    << csv::fmt_double(d.total) << '\n';
            }
        }

        nlohmann::json shares = nlohmann::json::object();
        for (exposure::Microenv m : exposure::kMicroenvs) {
            const exposure::Microenv one[] = {m};
            if (const auto s = exposure::exposure_share(days, one)) {
                shares[std::string(exposure::to_string(m))] = {{"exposure_pct", s->exposure_pct},
                                                               {"time_pct", s->time_pct}};
            }
        }
        const exposure::Microenv away[] = {exposure::Microenv::office, exposure::Microenv::other};
        nlohmann::json sj = {{"by_env", std::move(shares)}, {"days", days.size()}};
        if (const auto s = exposure::exposure_share(days, away)) {
            sj["office_other"] = {{"exposure_pct", s->exposure_pct}, {"time_pct", s->time_pct}};
        }
        std::size_t classified = 0, unclassified = 0;
        for (const exposure::DailyAttribution& d : days) {
            classified += d.classified_windows;
            unclassified += d.unclassified_windows;
        }
        sj["classified_windows"] = classified;
        sj["unclassified_windows"] = unclassified;
        {
            std::ofstream out = open_out(guard.track(out_dir / "exposure_shares.json"));
            out << sj.dump(2) << '\n';
        }

        std::map<std::string, std::int64_t> c;
        c["personal_windows"] = static_cast<std::int64_t>(windows.size());
        c["unclassified_windows"] = static_cast<std::int64_t>(labeled.unclassified);
        c["invalid_fixes"] = static_cast<std::int64_t>(labeled.invalid_fixes);
        c["carried_forward_windows"] = static_cast<std::int64_t>(labeled.carried_forward);
        c["clamped_predictions"] = clamped;
        c["attributed_days"] = static_cast<std::int64_t>(days.size());
        return guard.commit(std::move(c));
    });
}

StageResult run_report(const cfg::RunConfig& rc, const fs::path& stage_dir,
                       const fs::path& out_dir) {
    return guarded("report", [&] {
        StageGuard guard("report");
        fs::create_directories(out_dir);

        const cal::CalibrationModel model = load_model(stage_dir / "model.json");
        HourlyBundle bundle = hourly_calibrated(rc, stage_dir / "windowed.csv", model);
        const TimeSeries ref = load_reference_mean(rc, stage_dir);

        auto series_of = [&](const std::string& node) -> const TimeSeries* {
            auto it = bundle.by_node.find(node);
            return it == bundle.by_node.end() ? nullptr : &it->second;
        };

        // Figure 2: network averages with the 1-sigma band edges
        {
            std::ofstream f = open_out(guard.track(out_dir / "fig2_network.csv"));
            f << "timestamp_utc,group,mean,band_lo,band_hi,n_sensors\n";
            std::map<std::string, std::vector<TimeSeries>> groups;
            std::set<std::string> outdoor_seen;
            for (const cfg::SiteConfig& site : rc.sites) {
                if (const TimeSeries* in = series_of(site.indoor_node)) {
                    groups[site.hepa ? "hepa_indoor" : "nonhepa_indoor"].push_back(*in);
                }
                if (outdoor_seen.insert(site.outdoor_node).second) {
                    if (const TimeSeries* out = series_of(site.outdoor_node)) {
                        groups["outdoor"].push_back(*out);
                    }
                }
            }
            groups["reference"].push_back(ref);
            for (const auto& [name, members] : groups) {
                for (const stats::NetworkPoint& p : stats::network_average(members)) {
                    if (p.start < rc.study_start || p.start >= rc.study_end) continue;
                    const double sigma = p.sigma.value_or(0.0);
                    f << format_iso8601(p.start) << ',' << name << ',' << csv::fmt_double(p.mean)
                      << ',' << csv::fmt_double(p.mean - sigma) << ','
                      << csv::fmt_double(p.mean + sigma) << ',' << p.n_sensors << '\n';
                }
            }
        }

        // Figure 3: per-site indoor/outdoor/reference hourly triplets
        {
            std::ofstream f = open_out(guard.track(out_dir / "fig3_sites.csv"));
            f << "timestamp_utc,location_id,indoor,outdoor,reference\n";
            for (const cfg::SiteConfig& site : rc.sites) {
                const TimeSeries* indoor = series_of(site.indoor_node);
                const TimeSeries* outdoor = series_of(site.outdoor_node);
                std::map<EpochSeconds, std::array<std::optional<double>, 3>> rows;
                auto fill = [&](const TimeSeries* s, std::size_t slot) {
                    if (!s) return;
                    for (const Window& w : s->windows) {
                        if (w.valid) rows[w.start][slot] = w.mean_pm25;
                    }
                };
                fill(indoor, 0);
                fill(outdoor, 1);
                fill(&ref, 2);
                for (const auto& [t, vals] : rows) {
                    if (t < rc.study_start || t >= rc.study_end) continue;
                    f << format_iso8601(t) << ',' << site.id << ',' << opt_cell(vals[0]) << ','
                      << opt_cell(vals[1]) << ',' << opt_cell(vals[2]) << '\n';
                }
            }
        }

        // Figure 4: hourly I/O ratio long table
        {
            std::ofstream f = open_out(guard.track(out_dir / "fig4_io_hourly.csv"));
            f << "timestamp_utc,location_id,io_ratio\n";
            for (const cfg::SiteConfig& site : rc.sites) {
                const TimeSeries* indoor = series_of(site.indoor_node);
                const TimeSeries* outdoor = series_of(site.outdoor_node);
                if (!indoor || !outdoor) continue;
                const stats::IoRatioSeries io = stats::io_ratio(*indoor, *outdoor, site.id);
                for (const stats::IoRatioPoint& p : io.points) {
                    f << format_iso8601(p.start) << ',' << site.id << ','
                      << csv::fmt_double(p.ratio) << '\n';
                }
            }
        }

        // Figure 5: personal vs home monitors at 10-minute resolution
        if (rc.personal) {
            std::ofstream f = open_out(guard.track(out_dir / "fig5_personal.csv"));
            f << "timestamp_utc,node_id,pm25,is_night\n";
            auto by_node = group_by_node(csv::read_samples(stage_dir / "windowed.csv"));

            std::vector<std::string> nodes = {rc.personal->node};
            if (const cfg::SiteConfig* home = rc.find_site(rc.personal->home_site)) {
                // every indoor monitor in the wearer's building
                for (const cfg::SiteConfig& s : rc.sites) {
                    if (s.outdoor_node == home->outdoor_node) nodes.push_back(s.indoor_node);
                }
            }
            for (const std::string& node : nodes) {
                auto it = by_node.find(node);
                if (it == by_node.end()) continue;
                const TimeSeries raw = make_raw_series(node, it->second, rc.sample_period_s);
                TimeSeries ten =
                    aggregate(raw, WindowLen::ten_min, AggregateOptions{rc.min_coverage, 0.05});
                ten = cal::apply(model, ten);
                for (const Window& w : ten.windows) {
                    if (!w.valid) continue;
                    f << format_iso8601(w.start) << ',' << node << ','
                      << csv::fmt_double(w.mean_pm25) << ',' << (is_night(rc, w.start) ? 1 : 0)
                      << '\n';
                }
            }
        }

        // Figure 6: daily attribution stack
        {
            std::ifstream att(stage_dir / "attribution.csv");
            if (att) {
                std::ofstream f = open_out(guard.track(out_dir / "fig6_daily_attribution.csv"));
                f << "date,home_ac,office_ac,other_ac,total\n";
                std::string line;
                std::getline(att, line); // header
                std::map<std::string, std::array<std::string, 4>> by_date;
                while (std::getline(att, line)) {
                    if (line.empty()) continue;
                    const auto fields = csv::split_line(line);
                    if (fields.size() != 6) {
                        throw InputFormatError("attribution.csv: expected 6 columns");
                    }
                    auto& row = by_date[fields[0]];
                    if (fields[1] == "home") row[0] = fields[4];
                    if (fields[1] == "office") row[1] = fields[4];
                    if (fields[1] == "other") row[2] = fields[4];
                    row[3] = fields[5];
                }
                for (const auto& [date, row] : by_date) {
                    f << date << ',' << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3]
                      << '\n';
                }
            }
        }

        std::map<std::string, std::int64_t> c;
        c["nodes"] = static_cast<std::int64_t>(bundle.by_node.size());
        return guard.commit(std::move(c));
    });
}

nlohmann::json run_pipeline(const cfg::RunConfig& rc, const fs::path& input_dir,
                            const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<StageResult> results;
    results.push_back(run_ingest(rc, input_dir, out_dir));
    results.push_back(run_calibrate(rc, out_dir, out_dir));
    results.push_back(run_analyze(rc, out_dir, out_dir));
    if (rc.personal) results.push_back(run_attribute(rc, out_dir, out_dir));
    results.push_back(run_report(rc, out_dir, out_dir));

    nlohmann::json stages = nlohmann::json::array();
    for (const StageResult& r : results) {
        nlohmann::json outputs = nlohmann::json::array();
        for (const fs::path& p : r.outputs) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            char hash[24];
            std::snprintf(hash, sizeof hash, "%016llx",
                          static_cast<unsigned long long>(cfg::fnv1a_hash(ss.str())));
            outputs.push_back({{"file", p.filename().string()}, {"fnv1a64", hash}});
        }
        stages.push_back({{"name", r.name},
                          {"version", kStageVersion},
                          {"counters", r.counters},
                          {"outputs", std::move(outputs)}});
    }
    char cfg_hash[24];
    std::snprintf(cfg_hash, sizeof cfg_hash, "%016llx",
                  static_cast<unsigned long long>(rc.config_hash));
    nlohmann::json manifest = {{"config_fnv1a64", cfg_hash}, {"stages", std::move(stages)}};
    {
        std::ofstream out = open_out(out_dir / "manifest.json");
        out << manifest.dump(2) << '\n';
    }
    return manifest;
}

} // namespace airnet::pipeline
