#include "airnet/scenario.hpp"

#include "airnet/errors.hpp"
#include "airnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace airnet::sim {

double indoor_step(double c_in, double c_out, double penetration, double air_exchange_h,
                   double k_total_h, double dt_s) {
    const double loss = air_exchange_h + k_total_h; // h^-1
    const double c_ss = penetration * air_exchange_h * c_out / loss;
    const double dt_h = dt_s / 3600.0;
    return c_ss + (c_in - c_ss) * std::exp(-loss * dt_h);
}

double steady_state_ratio(double penetration, double air_exchange_h, double k_total_h) {
    return penetration * air_exchange_h / (air_exchange_h + k_total_h);
}

void ScenarioConfig::validate() const {
    if (start >= end) throw ConfigError("scenario: start must precede end");
    if (sample_period_s <= 0) throw ConfigError("scenario: sample_period_s must be positive");
    if (outdoor_profile.empty()) throw ConfigError("scenario: outdoor profile has no knots");
    for (std::size_t i = 1; i < outdoor_profile.size(); ++i) {
        if (outdoor_profile[i].t <= outdoor_profile[i - 1].t) {
            throw ConfigError("scenario: profile knots must be strictly increasing in time");
        }
    }
    if (sensor_slope <= 0.0) throw ConfigError("scenario: sensor_slope must be positive");
    if (sites.empty()) throw ConfigError("scenario: no sites configured");
    std::set<std::string> ids;
    for (const SimSite& s : sites) {
        if (!ids.insert(s.id).second) throw ConfigError("scenario: duplicate site id " + s.id);
        if (s.penetration <= 0.0 || s.penetration > 1.0) {
            throw ConfigError("scenario: site " + s.id + ": penetration must be in (0, 1]");
        }
        if (s.air_exchange_h <= 0.0) {
            throw ConfigError("scenario: site " + s.id + ": air_exchange must be positive");
        }
        if (s.k_extra_h < 0.0) {
            throw ConfigError("scenario: site " + s.id + ": k_extra must be non-negative");
        }
        if (s.hvac.period_min > 0.0 && (s.hvac.duty < 0.0 || s.hvac.duty > 1.0)) {
            throw ConfigError("scenario: site " + s.id + ": hvac duty must be in [0, 1]");
        }
    }
    if (!schedule.empty()) {
        // legs must tile the local day exactly, no gaps
        std::vector<ScheduleLeg> legs = schedule;
        std::sort(legs.begin(), legs.end(),
                  [](const ScheduleLeg& a, const ScheduleLeg& b) { return a.start_min < b.start_min; });
        int cursor = 0;
        for (const ScheduleLeg& leg : legs) {
            if (leg.start_min != cursor) {
                throw ConfigError("scenario: personal schedule has a gap or overlap at minute " +
                                  std::to_string(cursor));
            }
            if (leg.end_min <= leg.start_min) {
                throw ConfigError("scenario: schedule leg must end after it starts");
            }
            if (!exposure::microenv_from_string(leg.env)) {
                throw ConfigError("scenario: unknown schedule environment '" + leg.env + "'");
            }
            if (!env_sources.count(leg.env)) {
                throw ConfigError("scenario: no env_source for '" + leg.env + "'");
            }
            cursor = leg.end_min;
        }
        if (cursor != 1440) {
            throw ConfigError("scenario: personal schedule must cover the full day (ends at minute " +
                              std::to_string(cursor) + ")");
        }
        for (const auto& [env, source] : env_sources) {
            if (source == "outdoor") continue;
            bool known = false;
            for (const SimSite& s : sites) known |= s.id == source;
            if (!known) {
                throw ConfigError("scenario: env_source '" + source + "' is not a site id");
            }
        }
    }
    if (!calibration_node.empty()) {
        bool known = false;
        for (const SimSite& s : sites) {
            const std::string out_node = s.outdoor_node.empty() ? s.id + "-out" : s.outdoor_node;
            known |= out_node == calibration_node;
        }
        if (!known) {
            throw ConfigError("scenario: calibration_node '" + calibration_node +
                              "' is not an outdoor node of any site");
        }
    }
}

namespace {

double profile_value(const std::vector<ProfileKnot>& knots, EpochSeconds t) {
    if (t <= knots.front().t) return knots.front().value;
    if (t >= knots.back().t) return knots.back().value;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (t <= knots[i].t) {
            const double f = static_cast<double>(t - knots[i - 1].t) /
                             static_cast<double>(knots[i].t - knots[i - 1].t);
            return knots[i - 1].value + f * (knots[i].value - knots[i - 1].value);
        }
    }
    return knots.back().value;
}

bool hvac_active(const HvacCycle& h, EpochSeconds t, EpochSeconds episode_start) {
    if (h.period_min <= 0.0 || h.duty <= 0.0) return false;
    if (h.duty >= 1.0) return true;
    const double minutes = static_cast<double>(t - episode_start) / 60.0 + h.phase_min;
    const double in_period = std::fmod(minutes, h.period_min);
    return (in_period < 0.0 ? in_period + h.period_min : in_period) < h.duty * h.period_min;
}

struct JitteredPoint {
    double lat, lon;
};

// Uniform point on a disc of radius r around (lat, lon).
JitteredPoint jitter_around(Rng& rng, double lat, double lon, double radius_m) {
    constexpr double kEarthRadiusM = 6371008.8;
    const double r = radius_m * std::sqrt(rng.next_double());
    const double theta = 2.0 * std::numbers::pi * rng.next_double();
    const double dlat = (r * std::cos(theta) / kEarthRadiusM) * 180.0 / std::numbers::pi;
    const double coslat = std::cos(lat * std::numbers::pi / 180.0);
    const double dlon = (r * std::sin(theta) / (kEarthRadiusM * coslat)) * 180.0 / std::numbers::pi;
    return {lat + dlat, lon + dlon};
}

std::string outdoor_node_of(const SimSite& s) {
    return s.outdoor_node.empty() ? s.id + "-out" : s.outdoor_node;
}

} // namespace

EpisodeDataset generate_episode(const ScenarioConfig& cfg) {
    cfg.validate();
    EpisodeDataset data;
    data.cfg = cfg;

    const std::int64_t n_slots = (cfg.end - cfg.start) / cfg.sample_period_s;
    std::vector<EpochSeconds> slot_time(static_cast<std::size_t>(n_slots));
    for (std::int64_t i = 0; i < n_slots; ++i) {
        slot_time[static_cast<std::size_t>(i)] = cfg.start + i * cfg.sample_period_s;
    }

    // True outdoor field, shared by every site.
    std::vector<double> outdoor_truth(slot_time.size());
    for (std::size_t i = 0; i < slot_time.size(); ++i) {
        outdoor_truth[i] = profile_value(cfg.outdoor_profile, slot_time[i]);
    }

    // True indoor series per site.
    std::map<std::string, std::vector<double>> indoor_truth;
    for (const SimSite& site : cfg.sites) {
        std::vector<double> series(slot_time.size());
        std::vector<CookingSpike> spikes = site.spikes;
        std::sort(spikes.begin(), spikes.end(),
                  [](const CookingSpike& a, const CookingSpike& b) { return a.at < b.at; });
        std::size_t next_spike = 0;

        double k0 = site.k_extra_h +
                    (hvac_active(site.hvac, cfg.start, cfg.start) ? site.hvac.k_boost_h : 0.0);
        double c = steady_state_ratio(site.penetration, site.air_exchange_h, k0) * outdoor_truth[0];
        while (next_spike < spikes.size() && spikes[next_spike].at <= cfg.start) ++next_spike;

        for (std::size_t i = 0; i < slot_time.size(); ++i) {
            series[i] = c;
            const EpochSeconds t = slot_time[i];
            const double k = site.k_extra_h +
                             (hvac_active(site.hvac, t, cfg.start) ? site.hvac.k_boost_h : 0.0);
            c = indoor_step(c, outdoor_truth[i], site.penetration, site.air_exchange_h, k,
                            static_cast<double>(cfg.sample_period_s));
            const EpochSeconds t_next = t + cfg.sample_period_s;
            while (next_spike < spikes.size() && spikes[next_spike].at > t &&
                   spikes[next_spike].at <= t_next) {
                c += spikes[next_spike].mass_ug_m3;
                ++next_spike;
            }
        }
        indoor_truth[site.id] = std::move(series);
    }

    // Personal truth follows the schedule; empty schedule means no wearer.
    std::vector<double> personal_truth;
    std::vector<const ScheduleLeg*> slot_leg;
    if (!cfg.schedule.empty()) {
        personal_truth.resize(slot_time.size());
        slot_leg.resize(slot_time.size(), nullptr);
        for (std::size_t i = 0; i < slot_time.size(); ++i) {
            const int minute = local_seconds_of_day(slot_time[i], cfg.utc_offset_minutes) / 60;
            for (const ScheduleLeg& leg : cfg.schedule) {
                if (minute >= leg.start_min && minute < leg.end_min) {
                    slot_leg[i] = &leg;
                    break;
                }
            }
            const std::string& source = cfg.env_sources.at(slot_leg[i]->env);
            personal_truth[i] =
                source == "outdoor" ? outdoor_truth[i] : indoor_truth.at(source)[i];
        }
    }

    // Sensor observation streams. Each node draws noise from its own child
    // generator, so adding or removing nodes never reshuffles the others.
    auto observe = [&](const std::string& node_id,
                       const std::vector<double>& truth) -> std::vector<double> {
        Rng rng(cfg.seed ^ cfg::fnv1a_hash(node_id));
        std::vector<double> obs(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            double v = cfg.sensor_slope * truth[i] + cfg.sensor_intercept;
            if (cfg.sensor_noise_sigma > 0.0) v += rng.normal(0.0, cfg.sensor_noise_sigma);
            obs[i] = std::max(0.0, v);
        }
        return obs;
    };

    std::set<std::string> outdoor_done;
    for (const SimSite& site : cfg.sites) {
        const std::vector<double> in_obs = observe(site.id + "-in", indoor_truth.at(site.id));
        for (std::size_t i = 0; i < slot_time.size(); ++i) {
            Sample s;
            s.timestamp = slot_time[i];
            s.node_id = site.id + "-in";
            s.location_class = LocationClass::indoor;
            s.pm25 = in_obs[i];
            data.samples.push_back(std::move(s));
        }
        const std::string out_node = outdoor_node_of(site);
        if (outdoor_done.insert(out_node).second) {
            const std::vector<double> out_obs = observe(out_node, outdoor_truth);
            for (std::size_t i = 0; i < slot_time.size(); ++i) {
                Sample s;
                s.timestamp = slot_time[i];
                s.node_id = out_node;
                s.location_class = LocationClass::outdoor;
                s.pm25 = out_obs[i];
                data.samples.push_back(std::move(s));
            }
        }
    }

    // Geofences around the configured home/office anchors.
    data.fences.push_back(exposure::Geofence{exposure::Microenv::home, cfg.home_lat, cfg.home_lon,
                                             cfg.fence_radius_m});
    data.fences.push_back(exposure::Geofence{exposure::Microenv::office, cfg.office_lat,
                                             cfg.office_lon, cfg.fence_radius_m});

    if (!cfg.schedule.empty()) {
        const std::vector<double> p_obs = observe(cfg.personal_node, personal_truth);
        Rng gps_rng(cfg.seed ^ cfg::fnv1a_hash("gps:" + cfg.personal_node));
        for (std::size_t i = 0; i < slot_time.size(); ++i) {
            Sample s;
            s.timestamp = slot_time[i];
            s.node_id = cfg.personal_node;
            s.location_class = LocationClass::personal;
            s.pm25 = p_obs[i];
            double lat = cfg.other_lat, lon = cfg.other_lon;
            if (slot_leg[i]->env == "home") {
                lat = cfg.home_lat;
                lon = cfg.home_lon;
            } else if (slot_leg[i]->env == "office") {
                lat = cfg.office_lat;
                lon = cfg.office_lon;
            }
            const JitteredPoint p = jitter_around(gps_rng, lat, lon, cfg.gps_jitter_m);
            nmea::GpsFix fix;
            fix.timestamp = slot_time[i];
            fix.latitude = p.lat;
            fix.longitude = p.lon;
            fix.valid = true;
            s.gps = fix;
            data.samples.push_back(std::move(s));
        }
    }

    std::sort(data.samples.begin(), data.samples.end(), [](const Sample& a, const Sample& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.node_id < b.node_id;
    });

    // Hourly reference truth for complete hours (two regional monitors).
    const EpochSeconds first_hour = (cfg.start + 3599) / 3600 * 3600;
    for (EpochSeconds h = first_hour; h + 3600 <= cfg.end; h += 3600) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (EpochSeconds t = h; t < h + 3600; t += cfg.sample_period_s) {
            sum += profile_value(cfg.outdoor_profile, t);
            ++n;
        }
        const double mean = sum / static_cast<double>(n);
        data.reference.push_back(csv::ReferenceRow{h, "REF-1", mean});
        data.reference.push_back(csv::ReferenceRow{h, "REF-2", mean});
    }

    // Ground-truth ledger: everything the pipeline should recover.
    nlohmann::json gt;
    gt["seed"] = cfg.seed;
    gt["calibration"] = {
        {"sensor_slope", cfg.sensor_slope},
        {"sensor_intercept", cfg.sensor_intercept},
        {"beta1_true", 1.0 / cfg.sensor_slope},
        {"beta0_true", -cfg.sensor_intercept / cfg.sensor_slope},
    };
    nlohmann::json sites_json = nlohmann::json::object();
    for (const SimSite& site : cfg.sites) {
        nlohmann::json sj = {
            {"penetration", site.penetration},
            {"air_exchange_h", site.air_exchange_h},
            {"k_extra_h", site.k_extra_h},
            {"hepa", site.hepa},
            {"steady_state_io",
             steady_state_ratio(site.penetration, site.air_exchange_h, site.k_extra_h)},
        };
        if (site.hvac.period_min > 0.0 && site.hvac.k_boost_h > 0.0) {
            sj["steady_state_io_hvac_on"] = steady_state_ratio(
                site.penetration, site.air_exchange_h, site.k_extra_h + site.hvac.k_boost_h);
        }
        sites_json[site.id] = std::move(sj);
    }
    gt["sites"] = std::move(sites_json);

    if (!cfg.schedule.empty()) {
        // Slot-by-slot attribution over the true (undistorted) trace.
        struct DayAcc {
            std::array<double, 3> sum{};
            std::array<std::int64_t, 3> n{};
        };
        std::map<CivilDate, DayAcc> by_day;
        for (std::size_t i = 0; i < slot_time.size(); ++i) {
            const CivilDate day = local_date(slot_time[i], cfg.utc_offset_minutes);
            const auto env = exposure::microenv_from_string(slot_leg[i]->env);
            DayAcc& acc = by_day[day];
            acc.sum[static_cast<std::size_t>(*env)] += personal_truth[i];
            acc.n[static_cast<std::size_t>(*env)] += 1;
        }
        nlohmann::json days = nlohmann::json::array();
        std::array<double, 3> ac_total{};
        std::array<std::int64_t, 3> slots_total{};
        double grand_total = 0.0;
        for (const auto& [day, acc] : by_day) {
            const std::int64_t n_day = acc.n[0] + acc.n[1] + acc.n[2];
            nlohmann::json f, c, ac;
            double total = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                const std::string name(exposure::to_string(static_cast<exposure::Microenv>(k)));
                const double fk = static_cast<double>(acc.n[k]) / static_cast<double>(n_day);
                const double ck = acc.n[k] > 0 ? acc.sum[k] / static_cast<double>(acc.n[k]) : 0.0;
                const double ack = ck * fk; // sum_k F = 1 by construction
                f[name] = fk;
                c[name] = ck;
                ac[name] = ack;
                total += ack;
                ac_total[k] += ack;
                slots_total[k] += acc.n[k];
            }
            grand_total += total;
            days.push_back({{"date", format_date(day)},
                            {"f", f},
                            {"c", c},
                            {"ac", ac},
                            {"total", total},
                            {"slots", n_day}});
        }
        const std::int64_t all_slots = slots_total[0] + slots_total[1] + slots_total[2];
        nlohmann::json exposure_pct, time_pct;
        for (std::size_t k = 0; k < 3; ++k) {
            const std::string name(exposure::to_string(static_cast<exposure::Microenv>(k)));
            exposure_pct[name] = grand_total > 0.0 ? ac_total[k] / grand_total * 100.0 : 0.0;
            time_pct[name] =
                static_cast<double>(slots_total[k]) / static_cast<double>(all_slots) * 100.0;
        }
        gt["attribution"] = {{"days", std::move(days)},
                             {"aggregate", {{"exposure_pct", exposure_pct}, {"time_pct", time_pct}}}};
    }
    data.ground_truth = std::move(gt);
    return data;
}

namespace {

std::string fmt(double v) { return csv::fmt_double(v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputFormatError("cannot open for writing: " + path.string());
    out << text;
}

} // namespace

void write_episode(const EpisodeDataset& data, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    csv::write_samples(out_dir / "samples.csv", data.samples);
    csv::write_reference(out_dir / "reference.csv", data.reference);

    const ScenarioConfig& cfg = data.cfg;
    std::ostringstream sites;
    sites << "# sampling sites (synthetic episode)\n";
    for (const SimSite& s : cfg.sites) {
        sites << "\n[site " << s.id << "]\n"
              << "building_type = " << s.building_type << "\n"
              << "size_sqft = " << s.size_sqft << "\n"
              << "hvac = " << (s.hvac.period_min > 0.0 ? "yes" : "no") << "\n"
              << "hepa = " << (s.hepa ? "yes" : "no") << "\n"
              << "window_opening = " << s.window_opening << "\n"
              << "indoor_sources = " << s.indoor_sources << "\n"
              << "indoor_node = " << s.id << "-in\n"
              << "outdoor_node = " << outdoor_node_of(s) << "\n";
    }
    for (const exposure::Geofence& f : data.fences) {
        sites << "\n[fence " << exposure::to_string(f.label) << "]\n"
              << "lat = " << fmt(f.latitude) << "\n"
              << "lon = " << fmt(f.longitude) << "\n"
              << "radius_m = " << fmt(f.radius_m) << "\n";
    }
    if (!cfg.schedule.empty()) {
        sites << "\n[personal]\n"
              << "node = " << cfg.personal_node << "\n";
        if (!cfg.personal_home_site.empty()) sites << "home_site = " << cfg.personal_home_site << "\n";
    }
    write_text(out_dir / "sites.cfg", sites.str());

    std::ostringstream pc;
    pc << "# pipeline configuration (synthetic episode)\n"
       << "study_start = " << format_iso8601(cfg.start) << "\n"
       << "study_end = " << format_iso8601(cfg.end) << "\n"
       << "utc_offset_minutes = " << cfg.utc_offset_minutes << "\n"
       << "sample_period_s = " << cfg.sample_period_s << "\n"
       << "min_coverage = " << fmt(cfg.min_coverage) << "\n"
       << "min_monitors = " << cfg.min_monitors << "\n";
    std::string cal_node = cfg.calibration_node;
    if (cal_node.empty()) cal_node = outdoor_node_of(cfg.sites.front());
    pc << "calibration_node = " << cal_node << "\n";
    if (cfg.wilcoxon_during) {
        pc << "wilcoxon_during = " << format_iso8601(cfg.wilcoxon_during->first) << "/"
           << format_iso8601(cfg.wilcoxon_during->second) << "\n";
    }
    if (cfg.wilcoxon_post) {
        pc << "wilcoxon_post = " << format_iso8601(cfg.wilcoxon_post->first) << "/"
           << format_iso8601(cfg.wilcoxon_post->second) << "\n";
    }
    pc << "sites_file = sites.cfg\n";
    write_text(out_dir / "pipeline.cfg", pc.str());

    write_text(out_dir / "ground_truth.json", data.ground_truth.dump(2) + "\n");
}

} // namespace airnet::sim
