#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vlp/geometry.hpp"

namespace vlp {

// "key = value" lines; '#' starts a comment. Lookups that fail to parse throw
// ConfigError naming the key.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// camera.* keys over CameraIntrinsics defaults; cx/cy default to the image centre.
geom::CameraIntrinsics intrinsics_from_config(const KeyValueConfig& cfg);
// panel.side_m, panel.flux_lm, panel.cct_k, panel.ies_file (optional).
geom::LedPanel panel_from_config(const KeyValueConfig& cfg);

// Pose rows "x,y,z,roll,pitch,yaw" (header optional).
std::vector<geom::Pose> parse_pose_csv(const std::string& text);

}  // namespace vlp
