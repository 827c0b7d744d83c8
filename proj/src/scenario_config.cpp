#include "airnet/errors.hpp"
#include "airnet/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace airnet::sim {

namespace {

using cfg::KvFile;
using cfg::Section;

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

EpochSeconds parse_ts(const std::string& v, const std::string& ctx) {
    try {
        return parse_iso8601(v);
    } catch (const InputFormatError& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
}

std::pair<EpochSeconds, EpochSeconds> parse_window(const std::string& v, const std::string& ctx) {
    const std::size_t slash = v.find('/');
    if (slash == std::string::npos) throw ConfigError(ctx + ": expected '<start>/<end>'");
    const EpochSeconds a = parse_ts(v.substr(0, slash), ctx);
    const EpochSeconds b = parse_ts(v.substr(slash + 1), ctx);
    if (a >= b) throw ConfigError(ctx + ": window start must precede end");
    return {a, b};
}

// "7h 160" -> knot at start + 7 h with value 160
ProfileKnot parse_profile_knot(const std::string& v, EpochSeconds start, const std::string& ctx) {
    const auto parts = split_ws(v);
    if (parts.size() != 2 || parts[0].empty() || parts[0].back() != 'h') {
        throw ConfigError(ctx + ": expected '<hours>h <value>', got '" + v + "'");
    }
    const double hours = cfg::parse_number(parts[0].substr(0, parts[0].size() - 1), ctx);
    return ProfileKnot{start + static_cast<EpochSeconds>(hours * 3600.0),
                       cfg::parse_number(parts[1], ctx)};
}

// "HH:MM-HH:MM env"; 24:00 closes the day
ScheduleLeg parse_leg(const std::string& v, const std::string& ctx) {
    const auto parts = split_ws(v);
    if (parts.size() != 2) throw ConfigError(ctx + ": expected 'HH:MM-HH:MM <env>'");
    const std::string& span = parts[0];
    auto minutes = [&](const std::string& hm) {
        if (hm.size() != 5 || hm[2] != ':') throw ConfigError(ctx + ": bad time '" + hm + "'");
        const int h = static_cast<int>(cfg::parse_int(hm.substr(0, 2), ctx));
        const int m = static_cast<int>(cfg::parse_int(hm.substr(3, 2), ctx));
        if (h > 24 || m > 59 || (h == 24 && m != 0)) throw ConfigError(ctx + ": bad time '" + hm + "'");
        return h * 60 + m;
    };
    const std::size_t dash = span.find('-');
    if (dash == std::string::npos) throw ConfigError(ctx + ": expected 'HH:MM-HH:MM <env>'");
    return ScheduleLeg{minutes(span.substr(0, dash)), minutes(span.substr(dash + 1)), parts[1]};
}

void parse_fence_point(const std::string& v, double& lat, double& lon, const std::string& ctx) {
    const auto parts = split_ws(v);
    if (parts.size() != 2) throw ConfigError(ctx + ": expected '<lat> <lon>'");
    lat = cfg::parse_number(parts[0], ctx);
    lon = cfg::parse_number(parts[1], ctx);
}

} // namespace

ScenarioConfig scenario_from_file(const std::filesystem::path& path) {
    const KvFile file = cfg::parse_kv_file(path);
    const Section& top = file.preamble();
    const std::string ctx = path.string();

    ScenarioConfig sc;
    if (auto v = top.get("seed")) sc.seed = static_cast<std::uint64_t>(cfg::parse_int(*v, ctx));
    sc.start = parse_ts(top.require("start", ctx), ctx);
    sc.end = parse_ts(top.require("end", ctx), ctx);
    if (auto v = top.get("sample_period_s")) sc.sample_period_s = cfg::parse_int(*v, ctx);
    if (auto v = top.get("utc_offset_minutes"))
        sc.utc_offset_minutes = static_cast<int>(cfg::parse_int(*v, ctx));
    if (auto v = top.get("sensor_slope")) sc.sensor_slope = cfg::parse_number(*v, ctx);
    if (auto v = top.get("sensor_intercept")) sc.sensor_intercept = cfg::parse_number(*v, ctx);
    if (auto v = top.get("sensor_noise_sigma")) sc.sensor_noise_sigma = cfg::parse_number(*v, ctx);
    if (auto v = top.get("calibration_node")) sc.calibration_node = *v;
    if (auto v = top.get("min_coverage")) sc.min_coverage = cfg::parse_number(*v, ctx);
    if (auto v = top.get("min_monitors")) sc.min_monitors = static_cast<int>(cfg::parse_int(*v, ctx));
    if (auto v = top.get("wilcoxon_during")) sc.wilcoxon_during = parse_window(*v, ctx);
    if (auto v = top.get("wilcoxon_post")) sc.wilcoxon_post = parse_window(*v, ctx);
    if (auto v = top.get("fence_radius_m")) sc.fence_radius_m = cfg::parse_number(*v, ctx);
    if (auto v = top.get("gps_jitter_m")) sc.gps_jitter_m = cfg::parse_number(*v, ctx);
    if (auto v = top.get("personal_node")) sc.personal_node = *v;
    if (auto v = top.get("personal_home_site")) sc.personal_home_site = *v;
    if (auto v = top.get("home_fence")) parse_fence_point(*v, sc.home_lat, sc.home_lon, ctx);
    if (auto v = top.get("office_fence")) parse_fence_point(*v, sc.office_lat, sc.office_lon, ctx);
    if (auto v = top.get("other_point")) parse_fence_point(*v, sc.other_lat, sc.other_lon, ctx);

    for (const cfg::Entry& e : top.entries) {
        if (e.key == "profile") {
            sc.outdoor_profile.push_back(
                parse_profile_knot(e.value, sc.start, ctx + ":" + std::to_string(e.line)));
        } else if (e.key == "env_source") {
            const auto parts = split_ws(e.value);
            if (parts.size() != 2) {
                throw ConfigError(ctx + ":" + std::to_string(e.line) +
                                  ": expected 'env_source = <env> <site|outdoor>'");
            }
            sc.env_sources[parts[0]] = parts[1];
        }
    }

    for (const Section* s : file.of_kind("simsite")) {
        if (s->arg.empty()) throw ConfigError(ctx + ": [simsite] header needs an id");
        SimSite site;
        site.id = s->arg;
        const std::string sctx = ctx + " [simsite " + site.id + "]";
        if (auto v = s->get("penetration")) site.penetration = cfg::parse_number(*v, sctx);
        if (auto v = s->get("air_exchange")) site.air_exchange_h = cfg::parse_number(*v, sctx);
        if (auto v = s->get("k_extra")) site.k_extra_h = cfg::parse_number(*v, sctx);
        if (auto v = s->get("hepa")) site.hepa = cfg::parse_bool(*v);
        if (auto v = s->get("building_type")) site.building_type = *v;
        if (auto v = s->get("size_sqft")) site.size_sqft = static_cast<int>(cfg::parse_int(*v, sctx));
        if (auto v = s->get("window_opening")) site.window_opening = *v;
        if (auto v = s->get("indoor_sources")) site.indoor_sources = *v;
        if (auto v = s->get("outdoor_node")) site.outdoor_node = *v;
        if (auto v = s->get("hvac")) {
            const auto parts = split_ws(*v);
            if (parts.size() < 3 || parts.size() > 4) {
                throw ConfigError(sctx + ": expected 'hvac = <period_min> <duty> <k_boost> [phase_min]'");
            }
            site.hvac.period_min = cfg::parse_number(parts[0], sctx);
            site.hvac.duty = cfg::parse_number(parts[1], sctx);
            site.hvac.k_boost_h = cfg::parse_number(parts[2], sctx);
            if (parts.size() == 4) site.hvac.phase_min = cfg::parse_number(parts[3], sctx);
        }
        for (const cfg::Entry& e : s->entries) {
            if (e.key != "spike") continue;
            const auto parts = split_ws(e.value);
            if (parts.size() != 2) {
                throw ConfigError(sctx + ": expected 'spike = <iso-time> <mass>'");
            }
            site.spikes.push_back(
                CookingSpike{parse_ts(parts[0], sctx), cfg::parse_number(parts[1], sctx)});
        }
        sc.sites.push_back(std::move(site));
    }

    for (const Section* s : file.of_kind("schedule")) {
        for (const cfg::Entry& e : s->entries) {
            if (e.key != "leg") {
                throw ConfigError(ctx + ":" + std::to_string(e.line) +
                                  ": [schedule] accepts only 'leg' entries");
            }
            sc.schedule.push_back(parse_leg(e.value, ctx + ":" + std::to_string(e.line)));
        }
    }

    sc.validate();
    return sc;
}

void write_scenario_config(const ScenarioConfig& sc, const std::filesystem::path& path) {
    std::ostringstream out;
    auto num = [](double v) { return csv::fmt_double(v); };
    out << "# synthetic wildfire episode\n"
        << "seed = " << sc.seed << "\n"
        << "start = " << format_iso8601(sc.start) << "\n"
        << "end = " << format_iso8601(sc.end) << "\n"
        << "sample_period_s = " << sc.sample_period_s << "\n"
        << "utc_offset_minutes = " << sc.utc_offset_minutes << "\n"
        << "sensor_slope = " << num(sc.sensor_slope) << "\n"
        << "sensor_intercept = " << num(sc.sensor_intercept) << "\n"
        << "sensor_noise_sigma = " << num(sc.sensor_noise_sigma) << "\n"
        << "min_coverage = " << num(sc.min_coverage) << "\n"
        << "min_monitors = " << sc.min_monitors << "\n";
    if (!sc.calibration_node.empty()) out << "calibration_node = " << sc.calibration_node << "\n";
    if (sc.wilcoxon_during) {
        out << "wilcoxon_during = " << format_iso8601(sc.wilcoxon_during->first) << "/"
            << format_iso8601(sc.wilcoxon_during->second) << "\n";
    }
    if (sc.wilcoxon_post) {
        out << "wilcoxon_post = " << format_iso8601(sc.wilcoxon_post->first) << "/"
            << format_iso8601(sc.wilcoxon_post->second) << "\n";
    }
    for (const ProfileKnot& k : sc.outdoor_profile) {
        out << "profile = " << num(static_cast<double>(k.t - sc.start) / 3600.0) << "h "
            << num(k.value) << "\n";
    }
    out << "home_fence = " << num(sc.home_lat) << " " << num(sc.home_lon) << "\n"
        << "office_fence = " << num(sc.office_lat) << " " << num(sc.office_lon) << "\n"
        << "other_point = " << num(sc.other_lat) << " " << num(sc.other_lon) << "\n"
        << "fence_radius_m = " << num(sc.fence_radius_m) << "\n"
        << "gps_jitter_m = " << num(sc.gps_jitter_m) << "\n";
    if (!sc.schedule.empty()) {
        out << "personal_node = " << sc.personal_node << "\n";
        if (!sc.personal_home_site.empty())
            out << "personal_home_site = " << sc.personal_home_site << "\n";
        for (const auto& [env, source] : sc.env_sources) {
            out << "env_source = " << env << " " << source << "\n";
        }
    }
    for (const SimSite& s : sc.sites) {
        out << "\n[simsite " << s.id << "]\n"
            << "penetration = " << num(s.penetration) << "\n"
            << "air_exchange = " << num(s.air_exchange_h) << "\n"
            << "k_extra = " << num(s.k_extra_h) << "\n"
            << "hepa = " << (s.hepa ? "yes" : "no") << "\n"
            << "building_type = " << s.building_type << "\n"
            << "size_sqft = " << s.size_sqft << "\n"
            << "window_opening = " << s.window_opening << "\n"
            << "indoor_sources = " << s.indoor_sources << "\n";
        if (!s.outdoor_node.empty()) out << "outdoor_node = " << s.outdoor_node << "\n";
        if (s.hvac.period_min > 0.0) {
            out << "hvac = " << num(s.hvac.period_min) << " " << num(s.hvac.duty) << " "
                << num(s.hvac.k_boost_h) << " " << num(s.hvac.phase_min) << "\n";
        }
        for (const CookingSpike& sp : s.spikes) {
            out << "spike = " << format_iso8601(sp.at) << " " << num(sp.mass_ug_m3) << "\n";
        }
    }
    if (!sc.schedule.empty()) {
        out << "\n[schedule]\n";
        for (const ScheduleLeg& leg : sc.schedule) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", leg.start_min / 60,
                          leg.start_min % 60, leg.end_min / 60, leg.end_min % 60);
            out << "leg = " << buf << " " << leg.env << "\n";
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputFormatError("cannot open for writing: " + path.string());
    f << out.str();
}

ScenarioConfig default_scenario(std::uint64_t seed) {
    ScenarioConfig sc;
    sc.seed = seed;
    sc.start = parse_iso8601("2020-09-10T00:00:00Z");
    sc.end = parse_iso8601("2020-09-13T00:00:00Z");
    sc.sensor_slope = 1.46;
    sc.sensor_intercept = 2.0;
    sc.sensor_noise_sigma = 3.0;
    sc.calibration_node = "L7-out";
    sc.wilcoxon_during = {{sc.start + 12 * 3600, sc.start + 60 * 3600}};
    sc.wilcoxon_post = {{sc.start + 66 * 3600, sc.end}};

    // smoke arrives, holds above 150 ug/m3, then clears
    sc.outdoor_profile = {
        {sc.start, 8.0},           {sc.start + 6 * 3600, 9.0},   {sc.start + 18 * 3600, 155.0},
        {sc.start + 40 * 3600, 175.0}, {sc.start + 60 * 3600, 150.0}, {sc.start + 66 * 3600, 12.0},
        {sc.end, 10.0},
    };

    auto site = [](std::string id, double p, double a, double k, bool hepa, std::string type,
                   int sqft, std::string windows, std::string sources) {
        SimSite s;
        s.id = std::move(id);
        s.penetration = p;
        s.air_exchange_h = a;
        s.k_extra_h = k;
        s.hepa = hepa;
        s.building_type = std::move(type);
        s.size_sqft = sqft;
        s.window_opening = std::move(windows);
        s.indoor_sources = std::move(sources);
        return s;
    };

    SimSite l1 = site("L1", 0.85, 0.5, 2.5, true, "1-story SFH", 1600, "Sometimes", "Occasional cooking");
    SimSite l2a = site("L2-a", 0.85, 0.6, 0.55, true, "1-story SFH", 1500, "No", "Occasional cooking");
    SimSite l2b = site("L2-b", 0.85, 0.6, 0.75, true, "1-story SFH", 1500, "No", "Occasional cooking");
    l2b.outdoor_node = "L2-out"; // one outdoor monitor serves both rooms
    l2a.outdoor_node = "L2-out";
    SimSite l3 = site("L3", 0.9, 0.5, 0.15, false, "2-story SFH", 3500, "No", "Occasional cooking");
    l3.hvac = HvacCycle{180.0, 0.4, 0.0, 1.2}; // thermostat-driven precipitator
    SimSite l4 = site("L4", 1.0, 3.0, 0.2, false, "2-story SFH", 3000, "Always", "Frequent cooking");
    for (int day = 0; day < 3; ++day) {
        l4.spikes.push_back(CookingSpike{sc.start + day * kSecondsPerDay + 18 * 3600 + 1800, 120.0});
    }
    SimSite l5 = site("L5", 0.9, 0.8, 0.35, false, "Apartment", 800, "Sometimes", "Occasional cooking");
    SimSite l6 = site("L6", 0.9, 0.9, 0.25, false, "Office", 135, "No", "None");
    SimSite l7 = site("L7", 0.9, 0.9, 0.3, false, "Office", 144, "No", "None");
    l7.hvac = HvacCycle{120.0, 0.5, 0.0, 0.8};
    sc.sites = {l1, l2a, l2b, l3, l4, l5, l6, l7};

    sc.personal_home_site = "L2-a";
    sc.env_sources = {{"home", "L2-a"}, {"office", "L6"}, {"other", "outdoor"}};
    sc.schedule = {
        {0, 550, "home"},      // 00:00-09:10
        {550, 590, "other"},   // 09:10-09:50
        {590, 810, "office"},  // 09:50-13:30
        {810, 900, "other"},   // 13:30-15:00
        {900, 1440, "home"},   // 15:00-24:00
    };
    return sc;
}

} // namespace airnet::sim
