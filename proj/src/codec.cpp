#include "vlp/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vlp/errors.hpp"

namespace vlp::codec {

namespace {

std::uint8_t rotate_left(std::uint8_t v, int r) {
    r &= 7;
    return static_cast<std::uint8_t>(((v << r) | (v >> ((8 - r) & 7))) & 0xFF);
}

std::string format_id(std::uint8_t v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02X", v);
    return buf;
}

}  // namespace

std::array<int, 8> LedId::bits() const {
    std::array<int, 8> out{};
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = (value >> (7 - i)) & 1;
    return out;
}

bool cyclically_equivalent(std::uint8_t a, std::uint8_t b) {
    for (int r = 0; r < 8; ++r)
        if (rotate_left(a, r) == b) return true;
    return false;
}

std::vector<std::uint8_t> rotation_class_representatives() {
    std::vector<std::uint8_t> reps;
    for (int v = 0; v < 256; ++v) {
        bool smallest = true;
        for (int r = 1; r < 8; ++r) smallest = smallest && rotate_left(static_cast<std::uint8_t>(v), r) >= v;
        if (smallest) reps.push_back(static_cast<std::uint8_t>(v));
    }
    return reps;
}

LedDatabase::LedDatabase(std::vector<LedRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (!records_[i].world_position.is_finite()) throw std::invalid_argument("LED position must be finite");
        for (std::size_t j = 0; j < i; ++j) {
            const auto a = records_[i].id.value, b = records_[j].id.value;
            if (a == b) throw AmbiguousMatch("duplicate LED id " + format_id(a));
            if (cyclically_equivalent(a, b))
                throw AmbiguousMatch("LED ids " + format_id(b) + " and " + format_id(a) + " are cyclic rotations");
        }
    }
}

LedDatabase LedDatabase::parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<LedRecord> records;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("id", 0) == 0) continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) throw MalformedCsv("line " + std::to_string(line_no) + ": expected id,x,y,z");
        try {
            std::size_t used = 0;
            const unsigned long id = std::stoul(cells[0], &used, 0);
            if (used != cells[0].size() || id > 255) throw std::invalid_argument("id");
            LedRecord rec;
            rec.id.value = static_cast<std::uint8_t>(id);
            rec.world_position = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
            rec.mount_height_m = rec.world_position.z;
            records.push_back(rec);
        } catch (const std::logic_error&) {
            throw MalformedCsv("line " + std::to_string(line_no) + ": bad value");
        }
    }
    return LedDatabase(std::move(records));
}

LedDatabase LedDatabase::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

render::Waveform dm_encode(LedId id, double bit_rate_hz) {
    if (!(bit_rate_hz > 0.0)) throw std::invalid_argument("bit rate must be positive");
    std::vector<bool> levels;
    levels.reserve(16);
    bool level = true;
    for (int bit : id.bits()) {
        levels.push_back(level);
        if (bit == 0) level = !level;
        levels.push_back(level);
        level = !level;
    }
    // With an odd number of zeros the word ends on the level it started with,
    // so the next repetition must be the complement to keep the boundary
    // transition; the bit stream itself is polarity-free.
    const bool invert = !level;
    return render::Waveform(std::move(levels), 1e6 / (2.0 * bit_rate_hz), true, invert);
}

RowProfile extract_row_profile(const render::Frame& frame, const geom::CornerSet& quad) {
    const render::QuadSpans spans = render::quad_spans(quad, frame.width(), frame.height());
    if (spans.empty() || spans.pixel_count() == 0) throw EmptyQuad("quad has no interior rows in the frame");
    RowProfile profile;
    profile.first_row = spans.first_row;
    profile.values.reserve(spans.spans.size());
    for (std::size_t i = 0; i < spans.spans.size(); ++i) {
        const auto [c0, c1] = spans.spans[i];
        const auto row = frame.row(spans.first_row + static_cast<int>(i));
        double sum = 0.0;
        for (int c = c0; c < c1; ++c) sum += row[c];
        profile.values.push_back(c1 > c0 ? sum / (255.0 * (c1 - c0)) : 0.0);
    }
    return profile;
}

namespace {

struct Run {
    bool on;
    int length;
};

std::vector<Run> run_lengths(const std::vector<bool>& levels) {
    std::vector<Run> runs;
    for (bool v : levels) {
        if (!runs.empty() && runs.back().on == v) ++runs.back().length;
        else runs.push_back({v, 1});
    }
    return runs;
}

}  // namespace

std::vector<int> dm_decode(const RowProfile& profile, double row_readout_us, double exposure_us,
                           double bit_rate_hz) {
    if (!(row_readout_us > 0.0) || !(exposure_us > 0.0) || !(bit_rate_hz > 0.0))
        throw std::invalid_argument("decode timing must be positive");
    const double unit = 1e6 / (2.0 * bit_rate_hz) / row_readout_us;  // rows per level
    const auto& raw = profile.values;
    if (static_cast<double>(raw.size()) < 16.0 * unit)
        throw ProfileTooShort("profile spans " + std::to_string(raw.size()) + " rows, need " +
                              std::to_string(static_cast<int>(std::ceil(16.0 * unit))));

    const int half = static_cast<int>(std::floor(unit / 6.0));
    const int n = static_cast<int>(raw.size());
    std::vector<double> smooth(raw.size());
    for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - half), b = std::min(n - 1, i + half);
        double s = 0.0;
        for (int j = a; j <= b; ++j) s += raw[static_cast<std::size_t>(j)];
        smooth[static_cast<std::size_t>(i)] = s / (b - a + 1);
    }
    const auto [lo, hi] = std::minmax_element(smooth.begin(), smooth.end());
    if (*hi - *lo < 0.1) throw NoTransitions("row profile has no stripe contrast");
    const double threshold = (*hi + *lo) / 2.0;

    std::vector<bool> levels(smooth.size());
    for (std::size_t i = 0; i < smooth.size(); ++i) levels[i] = smooth[i] >= threshold;

    // Absorb slivers shorter than half a level into their neighbours.
    std::vector<Run> runs = run_lengths(levels);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
            if (runs[i].length < 0.5 * unit) {
                runs[i - 1].length += runs[i].length + runs[i + 1].length;
                runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(i), runs.begin() + static_cast<std::ptrdiff_t>(i) + 2);
                changed = true;
                break;
            }
        }
    }
    if (runs.size() < 3) throw NoTransitions("too few stripe transitions");
    runs.erase(runs.begin());
    runs.pop_back();

    std::vector<int> units;  // one entry per level, value = on
    int first_double = -1;
    for (const Run& r : runs) {
        const long k = std::lround(r.length / unit);
        if (k != 1 && k != 2)
            throw MalformedStripes("stripe run of " + std::to_string(r.length) + " rows is not 1 or 2 levels");
        if (k == 2 && first_double < 0) first_double = static_cast<int>(units.size());
        for (long j = 0; j < k; ++j) units.push_back(r.on ? 1 : 0);
    }
    // Equal adjacent levels only occur inside a 1 bit, so double runs start on
    // bit boundaries. Without any, every bit is 0 and alignment is moot.
    const std::size_t offset = first_double < 0 ? 0 : static_cast<std::size_t>(first_double % 2);
    std::vector<int> bits;
    for (std::size_t i = offset; i + 1 < units.size(); i += 2) {
        if (i > offset && units[i] == units[i - 1])
            throw MalformedStripes("missing transition at a bit boundary");
        bits.push_back(units[i] == units[i + 1] ? 1 : 0);
    }
    if (bits.size() < 8)
        throw ProfileTooShort("only " + std::to_string(bits.size()) + " complete bits in the profile");
    return bits;
}

const LedRecord& match_id(const std::vector<int>& bits, const LedDatabase& db) {
    if (bits.size() < 8) throw NoMatch("fewer than 8 decoded bits");
    const LedRecord* found = nullptr;
    for (const LedRecord& rec : db.records()) {
        const auto pattern = rec.id.bits();
        for (std::size_t r = 0; r < 8; ++r) {
            bool ok = true;
            for (std::size_t i = 0; i < bits.size() && ok; ++i) ok = bits[i] == pattern[(i + r) % 8];
            if (ok) {
                if (found && found != &rec)
                    throw AmbiguousMatch("bits match ids " + format_id(found->id.value) + " and " +
                                         format_id(rec.id.value));
                found = &rec;
                break;
            }
        }
    }
    if (!found) throw NoMatch("decoded bits match no LED in the database");
    return *found;
}

geom::Vec3 rcs_to_wcs(const geom::Vec3& position_lcs, const LedRecord& rec) {
    return rec.world_position + geom::Vec3{position_lcs.x, position_lcs.y, -position_lcs.z};
}

}  // namespace vlp::codec
