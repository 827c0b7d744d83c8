#pragma once

#include "airnet/config.hpp"
#include "airnet/csv.hpp"
#include "airnet/exposure.hpp"
#include "airnet/timeseries.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace airnet::sim {

// Single-zone mass balance dC/dt = P*a*C_out - (a + k_total)*C_in, advanced
// exactly over dt with C_out held constant. Unconditionally stable, so 10-s
// and hourly stepping agree (semigroup property).
double indoor_step(double c_in, double c_out, double penetration, double air_exchange_h,
                   double k_total_h, double dt_s);

double steady_state_ratio(double penetration, double air_exchange_h, double k_total_h);

struct HvacCycle {
    double period_min = 0.0; // 0 = no cycling
    double duty = 0.0;       // fraction of the period the unit runs
    double phase_min = 0.0;
    double k_boost_h = 0.0; // added to k_extra while running
};

struct CookingSpike {
    EpochSeconds at = 0;
    double mass_ug_m3 = 0.0; // instantaneous indoor concentration step
};

struct SimSite {
    std::string id;
    double penetration = 0.8;
    double air_exchange_h = 0.5;
    double k_extra_h = 0.1;
    HvacCycle hvac;
    std::vector<CookingSpike> spikes;
    bool hepa = false;
    std::string building_type = "1-story SFH";
    int size_sqft = 1500;
    std::string window_opening = "No";
    std::string indoor_sources = "None";
    std::string outdoor_node; // defaults to "<id>-out"; rows may share one
};

struct ProfileKnot {
    EpochSeconds t = 0;
    double value = 0.0;
};

// Daily-repeating personal schedule in local minutes of day.
struct ScheduleLeg {
    int start_min = 0;
    int end_min = 0; // exclusive, <= 1440
    std::string env; // home/office/other
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    EpochSeconds start = 0;
    EpochSeconds end = 0;
    std::int64_t sample_period_s = 10;
    int utc_offset_minutes = -420;

    std::vector<ProfileKnot> outdoor_profile; // piecewise-linear, clamped ends

    // Sensors observe slope*truth + intercept + N(0, sigma^2); calibration
    // should recover beta1 = 1/slope, beta0 = -intercept/slope.
    double sensor_slope = 1.0;
    double sensor_intercept = 0.0;
    double sensor_noise_sigma = 0.0;

    std::vector<SimSite> sites;
    std::string calibration_node;

    std::vector<ScheduleLeg> schedule;
    std::map<std::string, std::string> env_sources; // env -> site id or "outdoor"
    std::string personal_node = "P1";
    std::string personal_home_site;

    double home_lat = 47.6500, home_lon = -122.3000;
    double office_lat = 47.6560, office_lon = -122.3090;
    double other_lat = 47.6620, other_lon = -122.2880;
    double fence_radius_m = 10.0;
    double gps_jitter_m = 2.5; // the hardware's horizontal accuracy

    double min_coverage = 0.75;
    int min_monitors = 1;
    std::optional<std::pair<EpochSeconds, EpochSeconds>> wilcoxon_during;
    std::optional<std::pair<EpochSeconds, EpochSeconds>> wilcoxon_post;

    void validate() const; // throws ConfigError
};

ScenarioConfig scenario_from_file(const std::filesystem::path& path);
void write_scenario_config(const ScenarioConfig& sc, const std::filesystem::path& path);

// A built-in seven-site episode shaped like the study narrative; `simulate
// --emit-config` writes it out as an editable starting point.
ScenarioConfig default_scenario(std::uint64_t seed);

struct EpisodeDataset {
    ScenarioConfig cfg;
    std::vector<Sample> samples;             // every node, sorted by (timestamp, node)
    std::vector<csv::ReferenceRow> reference; // hourly regional-monitor rows
    std::vector<exposure::Geofence> fences;
    nlohmann::json ground_truth;
};

// Deterministic end-to-end synthesis: indoor series per site via the box
// model (HVAC cycling switches k_total, cooking spikes inject mass), sensor
// streams as affine-distorted truth plus noise, a personal trace that samples
// the occupied environment with fixes inside the matching fence, hourly
// reference truth, and a ground-truth ledger computed slot-by-slot.
EpisodeDataset generate_episode(const ScenarioConfig& cfg);

// Writes samples.csv, reference.csv, sites.cfg, pipeline.cfg and
// ground_truth.json; the directory is directly consumable by the pipeline.
void write_episode(const EpisodeDataset& data, const std::filesystem::path& out_dir);

} // namespace airnet::sim
