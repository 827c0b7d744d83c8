// airnet: decode PM-sensor and GPS logs, calibrate against reference
// monitors, and compute I/O ratio, reduction and exposure reports.

#include "airnet/config.hpp"
#include "airnet/csv.hpp"
#include "airnet/errors.hpp"
#include "airnet/frame.hpp"
#include "airnet/nmea.hpp"
#include "airnet/pipeline.hpp"
#include "airnet/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace airnet;

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputFormatError("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ParseArgs {
    std::string pms_path;
    std::string nmea_path;
    std::string node_id;
    std::string location_class = "outdoor";
    std::string start_iso;
    std::int64_t period_s = 10;
    std::int64_t gps_max_age_s = 30;
    std::string out_path = "samples.csv";
};

int cmd_parse(const ParseArgs& args) {
    const auto cls = location_class_from_string(args.location_class);
    if (!cls) throw ConfigError("unknown location class '" + args.location_class + "'");
    const EpochSeconds start = parse_iso8601(args.start_iso);

    const std::vector<std::uint8_t> bytes = read_binary(args.pms_path);
    const std::vector<pms::FrameResult> results = pms::resync_and_parse(bytes);

    std::vector<Sample> samples;
    std::size_t errors = 0;
    for (const pms::FrameResult& r : results) {
        if (const pms::FrameError* e = std::get_if<pms::FrameError>(&r)) {
            std::cerr << "frame error at byte " << e->offset << ": " << pms::to_string(e->kind)
                      << "\n";
            ++errors;
            continue;
        }
        const pms::SensorFrame& f = std::get<pms::SensorFrame>(r);
        Sample s;
        s.timestamp = start + static_cast<EpochSeconds>(samples.size()) * args.period_s;
        s.node_id = args.node_id;
        s.location_class = *cls;
        s.pm25 = f.pm25_atm;
        s.pm25_std = f.pm25_std;
        samples.push_back(std::move(s));
    }

    if (!args.nmea_path.empty()) {
        std::ifstream in(args.nmea_path);
        if (!in) throw InputFormatError("cannot open: " + args.nmea_path);
        nmea::LogStats stats;
        std::vector<nmea::GpsFix> fixes = nmea::parse_log(in, &stats);
        std::sort(fixes.begin(), fixes.end(),
                  [](const nmea::GpsFix& a, const nmea::GpsFix& b) {
                      return a.timestamp < b.timestamp;
                  });
        std::size_t fi = 0;
        for (Sample& s : samples) {
            while (fi + 1 < fixes.size() && fixes[fi + 1].timestamp <= s.timestamp) ++fi;
            if (!fixes.empty() && fixes[fi].timestamp <= s.timestamp &&
                s.timestamp - fixes[fi].timestamp <= args.gps_max_age_s) {
                s.gps = fixes[fi];
            }
        }
        std::cerr << "nmea: " << stats.fixes << " fixes, " << stats.skipped << " skipped, "
                  << stats.errors << " errors\n";
    }

    csv::write_samples(args.out_path, samples);
    std::cout << "wrote " << samples.size() << " samples to " << args.out_path << " (" << errors
              << " frame errors)\n";
    return 0;
}

void print_manifest_line(const pipeline::StageResult& r) {
    std::cout << "stage " << r.name << ":";
    for (const auto& [k, v] : r.counters) std::cout << ' ' << k << '=' << v;
    std::cout << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"airnet - low-cost PM2.5 sensor network analytics"};
    app.require_subcommand(1);

    ParseArgs pa;
    CLI::App* parse = app.add_subcommand("parse", "decode binary PM frames (+ NMEA) into a sample CSV");
    parse->add_option("--pms", pa.pms_path, "binary frame log")->required();
    parse->add_option("--nmea", pa.nmea_path, "NMEA text log to merge");
    parse->add_option("--node", pa.node_id, "node id for the emitted samples")->required();
    parse->add_option("--class", pa.location_class, "indoor|outdoor|personal|reference");
    parse->add_option("--start", pa.start_iso, "timestamp of the first frame (ISO-8601)")->required();
    parse->add_option("--period", pa.period_s, "sampling period in seconds (default 10)");
    parse->add_option("--gps-max-age", pa.gps_max_age_s, "max fix age to attach, seconds");
    parse->add_option("--out", pa.out_path, "output CSV path");

    std::string config_path, in_dir, out_dir;
    auto add_stage_opts = [&](CLI::App* cmd, bool needs_in = true) {
        cmd->add_option("--config", config_path, "pipeline config file")->required();
        if (needs_in) cmd->add_option("--in", in_dir, "input directory")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
    };
    CLI::App* ingest = app.add_subcommand("ingest", "validate samples and clip to the study window");
    add_stage_opts(ingest);
    CLI::App* calibrate = app.add_subcommand("calibrate", "fit the correction model against the reference mean");
    add_stage_opts(calibrate);
    std::string calibrate_node_override;
    calibrate->add_option("--node", calibrate_node_override, "override the calibration node");
    CLI::App* analyze = app.add_subcommand("analyze", "write table2, hourly I/O, network averages, wilcoxon");
    add_stage_opts(analyze);
    CLI::App* attribute = app.add_subcommand("attribute", "classify personal fixes and attribute daily exposure");
    add_stage_opts(attribute);
    CLI::App* report = app.add_subcommand("report", "emit plot-ready figure bundles");
    add_stage_opts(report);
    CLI::App* run = app.add_subcommand("run", "run the whole pipeline and write a manifest");
    add_stage_opts(run);

    std::string sim_config, sim_out, sim_emit;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    CLI::App* simulate = app.add_subcommand("simulate", "generate a deterministic synthetic episode");
    simulate->add_option("--config", sim_config, "scenario config (omit for the built-in episode)");
    simulate->add_option("--out", sim_out, "output directory");
    simulate->add_option("--seed", sim_seed, "override the scenario seed")
        ->each([&](const std::string&) { sim_seed_set = true; });
    simulate->add_option("--emit-config", sim_emit, "write the built-in scenario config to a file and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse->parsed()) return cmd_parse(pa);

        if (simulate->parsed()) {
            if (!sim_emit.empty()) {
                sim::write_scenario_config(sim::default_scenario(sim_seed_set ? sim_seed : 1),
                                           sim_emit);
                std::cout << "wrote scenario config to " << sim_emit << '\n';
                return 0;
            }
            if (sim_out.empty()) throw ConfigError("simulate requires --out");
            sim::ScenarioConfig sc = sim_config.empty() ? sim::default_scenario(sim_seed_set ? sim_seed : 1)
                                                        : sim::scenario_from_file(sim_config);
            if (sim_seed_set) sc.seed = sim_seed;
            const sim::EpisodeDataset data = sim::generate_episode(sc);
            sim::write_episode(data, sim_out);
            std::cout << "wrote episode (" << data.samples.size() << " samples, "
                      << data.reference.size() << " reference rows) to " << sim_out << '\n';
            return 0;
        }

        cfg::RunConfig rc = cfg::load_run_config(config_path);
        if (ingest->parsed()) {
            print_manifest_line(pipeline::run_ingest(rc, in_dir, out_dir));
        } else if (calibrate->parsed()) {
            if (!calibrate_node_override.empty()) rc.calibration_node = calibrate_node_override;
            print_manifest_line(pipeline::run_calibrate(rc, in_dir, out_dir));
        } else if (analyze->parsed()) {
            print_manifest_line(pipeline::run_analyze(rc, in_dir, out_dir));
        } else if (attribute->parsed()) {
            print_manifest_line(pipeline::run_attribute(rc, in_dir, out_dir));
        } else if (report->parsed()) {
            print_manifest_line(pipeline::run_report(rc, in_dir, out_dir));
        } else if (run->parsed()) {
            pipeline::run_pipeline(rc, in_dir, out_dir);
            std::cout << "pipeline complete; manifest at " << out_dir << "/manifest.json\n";
        }
        return 0;
    } catch (const pipeline::StageError& e) {
        std::cerr << "pipeline halted: " << e.what() << '\n';
        return e.exit_code();
    } catch (const InputFormatError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const FitError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const PreconditionError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
