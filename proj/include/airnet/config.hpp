#pragma once

#include "airnet/exposure.hpp"
#include "airnet/time.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace airnet::cfg {

// Line-oriented key-value file with [section] headers, '#' comments, and
// repeatable keys. Shared by the run, site and scenario configs.
struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

struct Section {
    std::string kind; // "" for the top preamble, else first word ("site", "fence", ...)
    std::string arg;  // remainder of the header, e.g. the site id
    std::vector<Entry> entries;
    std::size_t line = 0;

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key, const std::string& file) const;
};

struct KvFile {
    std::filesystem::path path;
    std::vector<Section> sections; // sections[0] is the preamble

    const Section& preamble() const { return sections.front(); }
    std::vector<const Section*> of_kind(const std::string& kind) const;
};

KvFile parse_kv_file(const std::filesystem::path& path);

bool parse_bool(const std::string& value);
double parse_number(const std::string& value, const std::string& context);
std::int64_t parse_int(const std::string& value, const std::string& context);

// Table-1-style description of one sampling site plus its node wiring.
struct SiteConfig {
    std::string id;
    std::string building_type;
    int size_sqft = 0;
    bool hvac = false;
    bool hepa = false;
    std::string window_opening;
    std::string indoor_sources;
    std::string indoor_node;  // the stream this row summarizes
    std::string outdoor_node; // may be shared between rows (two monitors, one site)
};

struct PersonalConfig {
    std::string node;
    std::string home_site;
};

struct RunConfig {
    EpochSeconds study_start = 0;
    EpochSeconds study_end = 0;
    int utc_offset_minutes = -420; // Seattle PDT; display and day boundaries only
    double min_coverage = 0.75;
    int min_monitors = 1;
    std::int64_t sample_period_s = 10;
    std::string calibration_node;
    std::optional<std::pair<EpochSeconds, EpochSeconds>> wilcoxon_during;
    std::optional<std::pair<EpochSeconds, EpochSeconds>> wilcoxon_post;
    int night_start_hour = 22;
    int night_end_hour = 6;
    std::int64_t gap_carry_forward_s = 1800;

    std::vector<SiteConfig> sites;
    std::optional<PersonalConfig> personal;
    std::vector<exposure::Geofence> fences;

    // FNV-1a over the config file bytes (sites file included); manifests use
    // it to tie outputs to their exact configuration.
    std::uint64_t config_hash = 0;

    const SiteConfig* find_site(const std::string& id) const;
    bool node_registered(const std::string& node_id) const;
};

// Loads the run config; a `sites_file` key pulls the site metadata and
// geofences from a second file next to it. Throws ConfigError with
// file:line context on any problem.
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a_hash(std::string_view bytes, std::uint64_t seed = 0xCBF29CE484222325ull);

} // namespace airnet::cfg
