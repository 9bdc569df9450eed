#include "vlp/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vlp/errors.hpp"
#include "vlp/photometry.hpp"

namespace vlp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
    return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    int v = 0;
    const auto& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("config key '" + key + "': '" + s + "' is not an integer");
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    const bool hex = s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X');
    const char* first = s.data() + (hex ? 2 : 0);
    const auto res = std::from_chars(first, s.data() + s.size(), v, hex ? 16 : 10);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("config key '" + key + "': '" + s + "' is not an unsigned integer");
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string s = it->second;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + key + "': '" + it->second + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
    return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : split_list(it->second);
}

geom::CameraIntrinsics intrinsics_from_config(const KeyValueConfig& cfg) {
    geom::CameraIntrinsics intr;
    intr.width_px = cfg.get_int("camera.width_px", intr.width_px);
    intr.height_px = cfg.get_int("camera.height_px", intr.height_px);
    intr.fx_px = cfg.get_double("camera.fx_px", intr.fx_px);
    intr.fy_px = cfg.get_double("camera.fy_px", intr.fy_px);
    intr.cx_px = cfg.get_double("camera.cx_px", intr.width_px / 2.0);
    intr.cy_px = cfg.get_double("camera.cy_px", intr.height_px / 2.0);
    intr.exposure_us = cfg.get_double("camera.exposure_us", intr.exposure_us);
    intr.iso_gain = cfg.get_double("camera.iso_gain", intr.iso_gain);
    intr.row_readout_us = cfg.get_double("camera.row_readout_us", intr.row_readout_us);
    try {
        intr.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("camera.*: ") + e.what());
    }
    return intr;
}

geom::LedPanel panel_from_config(const KeyValueConfig& cfg) {
    geom::LedPanel panel;
    panel.side_m = cfg.get_double("panel.side_m", panel.side_m);
    panel.flux_lm = cfg.get_double("panel.flux_lm", panel.flux_lm);
    panel.cct_k = cfg.get_double("panel.cct_k", panel.cct_k);
    try {
        const std::string ies = cfg.get_string("panel.ies_file", "");
        if (!ies.empty()) {
            std::ifstream in(ies);
            if (!in) throw ConfigError("panel.ies_file: cannot open " + ies);
            std::stringstream ss;
            ss << in.rdbuf();
            panel.curve = render::parse_ies(ss.str());
        } else {
            panel.curve = render::lambertian_default(panel.flux_lm);
        }
        panel.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("panel.*: ") + e.what());
    }
    return panel;
}

std::vector<geom::Pose> parse_pose_csv(const std::string& text) {
    std::vector<geom::Pose> poses;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split_list(line);
        if (line_no == 1 && !cells.empty() && cells[0] == "x") continue;
        if (cells.size() != 6) throw MalformedCsv("pose line " + std::to_string(line_no) + ": expected 6 values");
        std::array<double, 6> v{};
        for (std::size_t i = 0; i < 6; ++i) {
            try {
                v[i] = to_double("pose", cells[i]);
            } catch (const ConfigError&) {
                throw MalformedCsv("pose line " + std::to_string(line_no) + ": '" + cells[i] + "' is not a number");
            }
        }
        poses.push_back({{v[0], v[1], v[2]}, geom::Attitude(v[3], v[4], v[5])});
    }
    return poses;
}

}  // namespace vlp
