#include "airnet/config.hpp"

#include "airnet/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace airnet::cfg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

std::optional<std::string> Section::get(const std::string& key) const {
    for (const Entry& e : entries)
        if (e.key == key) return e.value;
    return std::nullopt;
}

std::string Section::get_or(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

std::string Section::require(const std::string& key, const std::string& file) const {
    auto v = get(key);
    if (!v) {
        const std::string where =
            kind.empty() ? "top level" : "section [" + kind + (arg.empty() ? "" : " " + arg) + "]";
        throw ConfigError(file + ": " + where + " is missing required key '" + key + "'");
    }
    return *v;
}

std::vector<const Section*> KvFile::of_kind(const std::string& kind) const {
    std::vector<const Section*> out;
    for (const Section& s : sections)
        if (s.kind == kind) out.push_back(&s);
    return out;
}

KvFile parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    KvFile file;
    file.path = path;
    file.sections.push_back(Section{});

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            const std::string header = trim(line.substr(1, line.size() - 2));
            Section s;
            s.line = line_no;
            const std::size_t sp = header.find(' ');
            if (sp == std::string::npos) {
                s.kind = header;
            } else {
                s.kind = header.substr(0, sp);
                s.arg = trim(header.substr(sp + 1));
            }
            file.sections.push_back(std::move(s));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        Entry e;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = line_no;
        if (e.key.empty()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        }
        file.sections.back().entries.push_back(std::move(e));
    }
    return file;
}

bool parse_bool(const std::string& value) {
    return value == "yes" || value == "true" || value == "1" || value == "y" || value == "Y";
}

double parse_number(const std::string& value, const std::string& context) {
    double v;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError(context + ": bad number '" + value + "'");
    }
    return v;
}

std::int64_t parse_int(const std::string& value, const std::string& context) {
    std::int64_t v;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError(context + ": bad integer '" + value + "'");
    }
    return v;
}

std::uint64_t fnv1a_hash(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

namespace {

std::uint64_t hash_file(const std::filesystem::path& path, std::uint64_t seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return seed;
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    return fnv1a_hash(s, seed);
}

std::pair<EpochSeconds, EpochSeconds> parse_window(const std::string& value,
                                                   const std::string& context) {
    const std::size_t slash = value.find('/');
    if (slash == std::string::npos) {
        throw ConfigError(context + ": expected '<start>/<end>' window, got '" + value + "'");
    }
    EpochSeconds a, b;
    try {
        a = parse_iso8601(trim(value.substr(0, slash)));
        b = parse_iso8601(trim(value.substr(slash + 1)));
    } catch (const InputFormatError& e) {
        throw ConfigError(context + ": " + e.what());
    }
    if (a >= b) throw ConfigError(context + ": window start must precede end");
    return {a, b};
}

void load_sites(const KvFile& file, RunConfig& rc) {
    const std::string fname = file.path.string();
    for (const Section* s : file.of_kind("site")) {
        if (s->arg.empty()) throw ConfigError(fname + ": [site] header needs an id");
        SiteConfig site;
        site.id = s->arg;
        site.building_type = s->get_or("building_type", "");
        if (auto v = s->get("size_sqft"))
            site.size_sqft = static_cast<int>(parse_int(*v, fname + " [site " + site.id + "]"));
        site.hvac = parse_bool(s->get_or("hvac", "no"));
        site.hepa = parse_bool(s->get_or("hepa", "no"));
        site.window_opening = s->get_or("window_opening", "");
        site.indoor_sources = s->get_or("indoor_sources", "");
        site.indoor_node = s->require("indoor_node", fname);
        site.outdoor_node = s->require("outdoor_node", fname);
        rc.sites.push_back(std::move(site));
    }
    for (const Section* s : file.of_kind("fence")) {
        const auto label = exposure::microenv_from_string(s->arg);
        if (!label || *label == exposure::Microenv::other) {
            throw ConfigError(fname + ": fence label must be 'home' or 'office', got '" + s->arg + "'");
        }
        exposure::Geofence f;
        f.label = *label;
        const std::string ctx = fname + " [fence " + s->arg + "]";
        f.latitude = parse_number(s->require("lat", fname), ctx);
        f.longitude = parse_number(s->require("lon", fname), ctx);
        f.radius_m = parse_number(s->get_or("radius_m", "10"), ctx);
        if (f.radius_m <= 0.0) throw ConfigError(ctx + ": radius_m must be positive");
        for (const exposure::Geofence& other : rc.fences) {
            if (other.label == f.label) throw ConfigError(ctx + ": duplicate fence label");
        }
        rc.fences.push_back(f);
    }
    for (const Section* s : file.of_kind("personal")) {
        PersonalConfig pc;
        pc.node = s->require("node", fname);
        pc.home_site = s->get_or("home_site", "");
        rc.personal = pc;
    }
}

} // namespace

const SiteConfig* RunConfig::find_site(const std::string& id) const {
    for (const SiteConfig& s : sites)
        if (s.id == id) return &s;
    return nullptr;
}

bool RunConfig::node_registered(const std::string& node_id) const {
    for (const SiteConfig& s : sites) {
        if (s.indoor_node == node_id || s.outdoor_node == node_id) return true;
    }
    return personal && personal->node == node_id;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const KvFile file = parse_kv_file(path);
    const Section& top = file.preamble();
    const std::string fname = path.string();

    RunConfig rc;
    try {
        rc.study_start = parse_iso8601(top.require("study_start", fname));
        rc.study_end = parse_iso8601(top.require("study_end", fname));
    } catch (const InputFormatError& e) {
        throw ConfigError(fname + ": " + e.what());
    }
    if (rc.study_start >= rc.study_end) {
        throw ConfigError(fname + ": study_start must precede study_end");
    }
    if (auto v = top.get("utc_offset_minutes"))
        rc.utc_offset_minutes = static_cast<int>(parse_int(*v, fname));
    if (auto v = top.get("min_coverage")) rc.min_coverage = parse_number(*v, fname);
    if (auto v = top.get("min_monitors")) rc.min_monitors = static_cast<int>(parse_int(*v, fname));
    if (auto v = top.get("sample_period_s")) rc.sample_period_s = parse_int(*v, fname);
    if (auto v = top.get("night_start_hour")) rc.night_start_hour = static_cast<int>(parse_int(*v, fname));
    if (auto v = top.get("night_end_hour")) rc.night_end_hour = static_cast<int>(parse_int(*v, fname));
    if (auto v = top.get("gap_carry_forward_s")) rc.gap_carry_forward_s = parse_int(*v, fname);
    if (auto v = top.get("wilcoxon_during")) rc.wilcoxon_during = parse_window(*v, fname);
    if (auto v = top.get("wilcoxon_post")) rc.wilcoxon_post = parse_window(*v, fname);
    rc.calibration_node = top.get_or("calibration_node", "");

    rc.config_hash = hash_file(path, 0xCBF29CE484222325ull);
    if (auto sites_file = top.get("sites_file")) {
        const std::filesystem::path sites_path = path.parent_path() / *sites_file;
        load_sites(parse_kv_file(sites_path), rc);
        rc.config_hash = hash_file(sites_path, rc.config_hash);
    } else {
        load_sites(file, rc); // sites may be inlined
    }

    if (rc.sites.empty()) throw ConfigError(fname + ": no [site] sections found");
    if (rc.calibration_node.empty()) {
        throw ConfigError(fname + ": calibration_node is required");
    }
    bool cal_is_outdoor = false;
    for (const SiteConfig& s : rc.sites) cal_is_outdoor |= s.outdoor_node == rc.calibration_node;
    if (!cal_is_outdoor) {
        throw ConfigError(fname + ": calibration_node '" + rc.calibration_node +
                          "' is not a registered outdoor node");
    }
    return rc;
}

} // namespace airnet::cfg
