#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vlp/frame.hpp"
#include "vlp/geometry.hpp"
#include "vlp/render.hpp"

namespace vlp::codec {

inline constexpr double kDefaultBitRateHz = 10'000.0;
inline constexpr double kDefaultMountHeightM = 2.56;

struct LedId {
    std::uint8_t value = 0;

    // MSB first.
    std::array<int, 8> bits() const;
    friend bool operator==(const LedId&, const LedId&) = default;
};

struct LedRecord {
    LedId id;
    geom::Vec3 world_position;
    double mount_height_m = kDefaultMountHeightM;
};

// True when one 8-bit pattern is a cyclic rotation of the other.
bool cyclically_equivalent(std::uint8_t a, std::uint8_t b);

// Immutable after construction. Rejects duplicate ids and ids that are cyclic
// rotations of one another (AmbiguousMatch), since alignment is only resolved
// up to rotation.
class LedDatabase {
public:
    explicit LedDatabase(std::vector<LedRecord> records);

    const std::vector<LedRecord>& records() const { return records_; }

    // CSV with header "id,x,y,z"; ids in decimal or 0x-prefixed hex.
    static LedDatabase load_csv(const std::filesystem::path& path);
    static LedDatabase parse_csv(const std::string& text);

private:
    std::vector<LedRecord> records_;
};

// Differential Manchester: a transition at every bit boundary, a mid-bit
// transition for 0, none for 1; the first level is on. Two levels per bit.
render::Waveform dm_encode(LedId id, double bit_rate_hz = kDefaultBitRateHz);

struct RowProfile {
    int first_row = 0;
    std::vector<double> values;  // mean in-quad brightness per row, [0, 1]
};

RowProfile extract_row_profile(const render::Frame& frame, const geom::CornerSet& quad);

// Consecutive bits of the periodic stream, at least 8, starting at an unknown
// offset into the code word.
std::vector<int> dm_decode(const RowProfile& profile, double row_readout_us, double exposure_us,
                           double bit_rate_hz = kDefaultBitRateHz);

const LedRecord& match_id(const std::vector<int>& bits, const LedDatabase& db);

// LCS z points down, WCS z points up; translation-only anchoring.
geom::Vec3 rcs_to_wcs(const geom::Vec3& position_lcs, const LedRecord& rec);

// One id per rotation class, smallest value first.
std::vector<std::uint8_t> rotation_class_representatives();

}  // namespace vlp::codec
