#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "airnet/config.hpp"
#include "airnet/csv.hpp"
#include "airnet/errors.hpp"
#include "airnet/pipeline.hpp"
#include "airnet/rng.hpp"
#include "airnet/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace airnet;
namespace fs = std::filesystem;

namespace {

constexpr EpochSeconds kT0 = 1599696000; // 2020-09-10T00:00:00Z

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("airnet_pipe_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small two-site episode with a personal trace; one local day long.
sim::ScenarioConfig small_scenario() {
    sim::ScenarioConfig sc;
    sc.seed = 12;
    sc.start = kT0;
    sc.end = kT0 + 86400 + 7 * 3600; // covers one full local day
    sc.sensor_slope = 1.4;
    sc.sensor_intercept = 1.0;
    sc.sensor_noise_sigma = 1.5;
    sc.outdoor_profile = {{kT0, 120.0}, {sc.end, 140.0}};
    sc.wilcoxon_during = {{kT0, kT0 + 15 * 3600}};
    sc.wilcoxon_post = {{kT0 + 15 * 3600, sc.end}};

    sim::SimSite home;
    home.id = "H";
    home.penetration = 0.9;
    home.air_exchange_h = 0.7;
    home.k_extra_h = 1.8;
    home.hepa = true;
    sim::SimSite office;
    office.id = "O";
    office.penetration = 0.9;
    office.air_exchange_h = 0.7;
    office.k_extra_h = 0.3;
    sc.sites = {home, office};
    sc.calibration_node = "H-out";

    sc.personal_home_site = "H";
    sc.env_sources = {{"home", "H"}, {"office", "O"}, {"other", "outdoor"}};
    sc.schedule = {
        {0, 540, "home"}, {540, 560, "other"}, {560, 1020, "office"}, {1020, 1440, "home"}};
    return sc;
}

} // namespace

TEST_CASE("samples CSV round trips every field") {
    TempDir dir("csv");
    Rng rng(4);
    std::vector<Sample> samples;
    for (int i = 0; i < 200; ++i) {
        Sample s;
        s.timestamp = kT0 + i * 10;
        s.node_id = "N" + std::to_string(i % 3);
        s.location_class = static_cast<LocationClass>(i % 4);
        s.pm25 = rng.uniform(0, 300);
        if (i % 2 == 0) s.pm25_std = rng.uniform(0, 300);
        if (i % 3 == 0) {
            nmea::GpsFix f;
            f.timestamp = s.timestamp;
            f.latitude = rng.uniform(-89, 89);
            f.longitude = rng.uniform(-179, 179);
            f.valid = i % 6 == 0;
            s.gps = f;
        }
        if (i % 5 == 0) {
            s.env.temperature_c = rng.uniform(-5, 35);
            s.env.rh_pct = rng.uniform(10, 95);
        }
        samples.push_back(std::move(s));
    }
    const fs::path p = dir.path / "samples.csv";
    csv::write_samples(p, samples);
    const auto back = csv::read_samples(p);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].timestamp == samples[i].timestamp);
        CHECK(back[i].node_id == samples[i].node_id);
        CHECK(back[i].location_class == samples[i].location_class);
        CHECK(back[i].pm25 == doctest::Approx(samples[i].pm25).epsilon(1e-9));
        CHECK(back[i].gps.has_value() == samples[i].gps.has_value());
        if (back[i].gps) {
            CHECK(back[i].gps->valid == samples[i].gps->valid);
            CHECK(back[i].gps->latitude == doctest::Approx(samples[i].gps->latitude).epsilon(1e-9));
        }
        CHECK(back[i].env.temperature_c.has_value() == samples[i].env.temperature_c.has_value());
    }
}

TEST_CASE("samples CSV rejects malformed rows with row context") {
    TempDir dir("csvbad");
    const fs::path p = dir.path / "bad.csv";
    {
        std::ofstream out(p);
        out << "timestamp_utc,node_id,location_class,pm25_atm,pm25_std,lat,lon,gps_valid,temp_c,rh_pct\n";
        out << "2020-09-10T00:00:00Z,N1,indoor,12.5,,,,,,\n";
        out << "2020-09-10T00:00:10Z,N1,indoor,not_a_number,,,,,,\n";
    }
    try {
        csv::read_samples(p);
        FAIL("expected InputFormatError");
    } catch (const InputFormatError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos); // row 3
    }

    {
        std::ofstream out(p);
        out << "2020-09-10T00:00:00Z,N1,indoor,-4,,,,,,\n";
    }
    CHECK_THROWS_AS(csv::read_samples(p), InputFormatError); // negative pm25
}

TEST_CASE("run config loader validates structure") {
    TempDir dir("cfg");
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir.path / name);
        out << text;
        return dir.path / name;
    };

    const fs::path good = write("good.cfg",
                                "study_start = 2020-09-10T00:00:00Z\n"
                                "study_end = 2020-09-12T00:00:00Z\n"
                                "calibration_node = S1-out\n"
                                "[site S1]\n"
                                "indoor_node = S1-in\n"
                                "outdoor_node = S1-out\n"
                                "[fence home]\n"
                                "lat = 47.65\nlon = -122.3\n"
                                "[personal]\nnode = P1\nhome_site = S1\n");
    const cfg::RunConfig rc = cfg::load_run_config(good);
    CHECK(rc.sites.size() == 1);
    CHECK(rc.personal->node == "P1");
    CHECK(rc.fences.size() == 1);
    CHECK(rc.node_registered("S1-in"));
    CHECK(rc.node_registered("P1"));
    CHECK_FALSE(rc.node_registered("ghost"));
    CHECK(rc.config_hash != 0);

    CHECK_THROWS_AS(cfg::load_run_config(write("missing.cfg", "study_start = 2020-09-10T00:00:00Z\n")),
                    ConfigError);
    CHECK_THROWS_AS(
        cfg::load_run_config(write(
            "badcal.cfg",
            "study_start = 2020-09-10T00:00:00Z\nstudy_end = 2020-09-12T00:00:00Z\n"
            "calibration_node = S1-in\n[site S1]\nindoor_node = S1-in\noutdoor_node = S1-out\n")),
        ConfigError); // calibration node must be an outdoor node
    CHECK_THROWS_AS(
        cfg::load_run_config(write("dupfence.cfg",
                                   "study_start = 2020-09-10T00:00:00Z\nstudy_end = "
                                   "2020-09-12T00:00:00Z\ncalibration_node = S1-out\n"
                                   "[site S1]\nindoor_node = S1-in\noutdoor_node = S1-out\n"
                                   "[fence home]\nlat = 1\nlon = 2\n"
                                   "[fence home]\nlat = 3\nlon = 4\n")),
        ConfigError);
}

TEST_CASE("full pipeline over a simulated episode") {
    TempDir in_dir("episode"), out_dir("out");
    const sim::EpisodeDataset data = sim::generate_episode(small_scenario());
    sim::write_episode(data, in_dir.path);

    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");
    CHECK(rc.sites.size() == 2);
    REQUIRE(rc.personal.has_value());

    const nlohmann::json manifest = pipeline::run_pipeline(rc, in_dir.path, out_dir.path);

    // every stage output exists
    for (const char* f :
         {"windowed.csv", "reference_windowed.csv", "model.json", "fit_report.json", "table2.csv",
          "io_hourly.csv", "network_avg.csv", "wilcoxon.json", "attribution.csv",
          "exposure_shares.json", "fig2_network.csv", "fig3_sites.csv", "fig4_io_hourly.csv",
          "fig5_personal.csv", "fig6_daily_attribution.csv", "manifest.json"}) {
        CHECK_MESSAGE(fs::exists(out_dir.path / f), f);
    }

    // table2 has one row per configured site
    std::ifstream t2(out_dir.path / "table2.csv");
    std::string line;
    std::getline(t2, line); // header
    std::set<std::string> row_ids;
    while (std::getline(t2, line)) {
        if (!line.empty()) row_ids.insert(line.substr(0, line.find(',')));
    }
    CHECK(row_ids == std::set<std::string>{"H", "O"});

    // the calibration recovered the configured distortion
    std::ifstream mj(out_dir.path / "model.json");
    nlohmann::json model;
    mj >> model;
    CHECK(model["form"] == "linear_free_intercept");
    CHECK(std::abs(model["beta1"].get<double>() - 1.0 / 1.4) < 0.02);

    // manifest counters are present and plausible
    bool saw_ingest = false;
    for (const auto& st : manifest["stages"]) {
        if (st["name"] == "ingest") {
            saw_ingest = true;
            CHECK(st["counters"]["rows_kept"].get<std::int64_t>() > 0);
        }
    }
    CHECK(saw_ingest);
}

TEST_CASE("table2 row matches an independent recomputation from the stage files") {
    TempDir in_dir("row_in"), out_dir("row_out");
    const sim::EpisodeDataset data = sim::generate_episode(small_scenario());
    sim::write_episode(data, in_dir.path);
    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");
    pipeline::run_pipeline(rc, in_dir.path, out_dir.path);

    // the site H row, as printed
    std::ifstream t2(out_dir.path / "table2.csv");
    std::string line, row;
    std::getline(t2, line);
    while (std::getline(t2, line)) {
        if (line.rfind("H,", 0) == 0) row = line;
    }
    REQUIRE_FALSE(row.empty());
    const auto cells = csv::split_line(row);
    REQUIRE(cells.size() == 10);

    // recompute it with plain loops over windowed.csv and model.json
    nlohmann::json mj;
    std::ifstream(out_dir.path / "model.json") >> mj;
    const double b0 = mj["beta0"].get<double>();
    const double b1 = mj["beta1"].get<double>();

    std::map<EpochSeconds, std::pair<double, int>> in_acc, out_acc;
    for (const Sample& s : csv::read_samples(out_dir.path / "windowed.csv")) {
        if (s.node_id != "H-in" && s.node_id != "H-out") continue;
        auto& acc = (s.node_id == "H-in" ? in_acc : out_acc)[s.timestamp / 3600 * 3600];
        acc.first += s.pm25;
        acc.second += 1;
    }
    auto corrected_hours = [&](const std::map<EpochSeconds, std::pair<double, int>>& acc) {
        std::map<EpochSeconds, double> hours;
        for (const auto& [t, sn] : acc) {
            if (sn.second < 270) continue; // 75% of 360 raw samples
            hours[t] = std::max(0.0, b0 + b1 * (sn.first / sn.second));
        }
        return hours;
    };
    const auto in_h = corrected_hours(in_acc);
    const auto out_h = corrected_hours(out_acc);

    double i_sum = 0, i_max = -1, o_sum = 0, o_max = -1;
    for (const auto& [t, v] : in_h) {
        i_sum += v;
        i_max = std::max(i_max, v);
    }
    for (const auto& [t, v] : out_h) {
        o_sum += v;
        o_max = std::max(o_max, v);
    }
    const double i_mean = i_sum / static_cast<double>(in_h.size());
    const double o_mean = o_sum / static_cast<double>(out_h.size());
    std::vector<double> ratios;
    for (const auto& [t, v] : in_h) {
        auto it = out_h.find(t);
        if (it != out_h.end() && it->second > 0.0) ratios.push_back(v / it->second);
    }
    std::sort(ratios.begin(), ratios.end());
    const std::size_t m = ratios.size() / 2;
    const double med = ratios.size() % 2 ? ratios[m] : 0.5 * (ratios[m - 1] + ratios[m]);
    double r_sum = 0;
    for (double r : ratios) r_sum += r;

    CHECK(std::stod(cells[1]) == doctest::Approx(i_mean).epsilon(1e-8));
    CHECK(std::stod(cells[2]) == doctest::Approx(i_max).epsilon(1e-8));
    CHECK(std::stod(cells[3]) == doctest::Approx(o_mean).epsilon(1e-8));
    CHECK(std::stod(cells[4]) == doctest::Approx(o_max).epsilon(1e-8));
    CHECK(std::stod(cells[5]) == doctest::Approx(ratios.front()).epsilon(1e-8));
    CHECK(std::stod(cells[6]) == doctest::Approx(med).epsilon(1e-8));
    CHECK(std::stod(cells[7]) == doctest::Approx(r_sum / ratios.size()).epsilon(1e-8));
    CHECK(std::stod(cells[8]) == doctest::Approx(ratios.back()).epsilon(1e-8));
    CHECK(std::stod(cells[9]) == doctest::Approx((o_mean - i_mean) / o_mean * 100.0).epsilon(1e-8));
}

TEST_CASE("pipeline is deterministic across runs") {
    TempDir in_dir("det_in"), out1("det_o1"), out2("det_o2");
    const sim::EpisodeDataset data = sim::generate_episode(small_scenario());
    sim::write_episode(data, in_dir.path);
    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");

    pipeline::run_pipeline(rc, in_dir.path, out1.path);
    pipeline::run_pipeline(rc, in_dir.path, out2.path);
    CHECK(slurp(out1.path / "manifest.json") == slurp(out2.path / "manifest.json"));
    CHECK(slurp(out1.path / "table2.csv") == slurp(out2.path / "table2.csv"));
    CHECK(slurp(out1.path / "attribution.csv") == slurp(out2.path / "attribution.csv"));
}

TEST_CASE("pipeline halts at calibrate when the calibration node has no data") {
    TempDir in_dir("halt_in"), out_dir("halt_out");
    sim::ScenarioConfig sc = small_scenario();
    sc.schedule.clear(); // no personal trace needed here
    const sim::EpisodeDataset data = sim::generate_episode(sc);
    sim::write_episode(data, in_dir.path);

    // strip the calibration node's rows from samples.csv
    {
        std::ifstream in(in_dir.path / "samples.csv");
        std::ostringstream kept;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find(",H-out,") == std::string::npos) kept << line << '\n';
        }
        std::ofstream out(in_dir.path / "samples.csv", std::ios::binary);
        out << kept.str();
    }

    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");
    try {
        pipeline::run_pipeline(rc, in_dir.path, out_dir.path);
        FAIL("expected StageError");
    } catch (const pipeline::StageError& e) {
        CHECK(e.stage() == "calibrate");
        CHECK(e.exit_code() == 4);
        CHECK(std::string(e.what()).find("H-out") != std::string::npos);
    }
    // the failed stage removed its partial outputs; earlier stages remain
    CHECK(fs::exists(out_dir.path / "windowed.csv"));
    CHECK_FALSE(fs::exists(out_dir.path / "model.json"));
    CHECK_FALSE(fs::exists(out_dir.path / "fit_report.json"));
}

TEST_CASE("ingest counters equal a brute-force recount") {
    TempDir in_dir("count_in"), out_dir("count_out");
    sim::ScenarioConfig sc = small_scenario();
    sc.schedule.clear();
    sc.end = kT0 + 6 * 3600; // keep it small
    const sim::EpisodeDataset data = sim::generate_episode(sc);
    sim::write_episode(data, in_dir.path);

    // append rows outside the window and rows from an unknown node
    std::size_t extra_outside = 0, extra_unknown = 0;
    {
        std::ofstream out(in_dir.path / "samples.csv", std::ios::app);
        for (int i = 0; i < 7; ++i) {
            out << format_iso8601(kT0 - 3600 + i) << ",H-in,indoor,5,,,,,,\n";
            ++extra_outside;
        }
        for (int i = 0; i < 5; ++i) {
            out << format_iso8601(kT0 + 100 + i) << ",GHOST,indoor,5,,,,,,\n";
            ++extra_unknown;
        }
    }

    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");
    const pipeline::StageResult r = pipeline::run_ingest(rc, in_dir.path, out_dir.path);

    // brute-force recount straight from the input file
    const auto rows = csv::read_samples(in_dir.path / "samples.csv");
    std::int64_t outside = 0, unknown = 0, kept = 0;
    for (const Sample& s : rows) {
        if (s.timestamp < rc.study_start || s.timestamp >= rc.study_end) {
            ++outside;
        } else if (!rc.node_registered(s.node_id)) {
            ++unknown;
        } else {
            ++kept;
        }
    }
    CHECK(outside == static_cast<std::int64_t>(extra_outside));
    CHECK(unknown == static_cast<std::int64_t>(extra_unknown));
    CHECK(r.counters.at("rows_in") == static_cast<std::int64_t>(rows.size()));
    CHECK(r.counters.at("dropped_out_of_window") == outside);
    CHECK(r.counters.at("dropped_unregistered_node") == unknown);
    CHECK(r.counters.at("rows_kept") == kept);
}

TEST_CASE("stages re-run independently from prior stage files") {
    TempDir in_dir("stage_in"), out_dir("stage_out");
    sim::ScenarioConfig sc = small_scenario();
    const sim::EpisodeDataset data = sim::generate_episode(sc);
    sim::write_episode(data, in_dir.path);
    const cfg::RunConfig rc = cfg::load_run_config(in_dir.path / "pipeline.cfg");

    pipeline::run_ingest(rc, in_dir.path, out_dir.path);
    pipeline::run_calibrate(rc, out_dir.path, out_dir.path);
    pipeline::run_analyze(rc, out_dir.path, out_dir.path);
    pipeline::run_attribute(rc, out_dir.path, out_dir.path);
    pipeline::run_report(rc, out_dir.path, out_dir.path);
    CHECK(fs::exists(out_dir.path / "fig6_daily_attribution.csv"));

    // attribution shares land near the ground-truth ledger
    std::ifstream sh(out_dir.path / "exposure_shares.json");
    nlohmann::json shares;
    sh >> shares;
    const double got = shares["office_other"]["exposure_pct"].get<double>();
    const auto& gt = data.ground_truth["attribution"]["aggregate"]["exposure_pct"];
    const double want = gt["office"].get<double>() + gt["other"].get<double>();
    CHECK(std::abs(got - want) < 2.0);
}
