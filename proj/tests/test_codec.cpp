#include <doctest.h>

#include <random>
#include <set>

#include "vlp/codec.hpp"
#include "vlp/errors.hpp"
#include "vlp/render.hpp"

using namespace vlp;
using namespace vlp::codec;
using geom::Attitude;
using geom::Pose;

namespace {

std::uint8_t rotl(std::uint8_t v, int r) { return static_cast<std::uint8_t>((v << r) | (v >> (8 - r))); }

bool equivalent_oracle(std::uint8_t a, std::uint8_t b) {
    for (int r = 0; r < 8; ++r)
        if (rotl(a, r) == b) return true;
    return false;
}

bool is_rotation_of(const std::vector<int>& bits, std::uint8_t id) {
    const auto pattern = LedId{id}.bits();
    for (int r = 0; r < 8; ++r) {
        bool ok = true;
        for (std::size_t i = 0; i < bits.size() && ok; ++i) ok = bits[i] == pattern[(i + r) % 8];
        if (ok) return true;
    }
    return false;
}

struct Capture {
    render::Frame frame;
    geom::CornerSet quad;
};

Capture nadir_capture(std::uint8_t id, double z, double phase) {
    const geom::CameraIntrinsics intr;
    const geom::LedPanel panel;
    const Pose pose{{0, 0, z}, Attitude()};
    const auto quad = geom::project_panel_corners(intr, pose, panel);
    auto frame = render::rasterize_quad(quad, intr.width_px, intr.height_px, render::frame_meta(intr),
                                        render::base_brightness(pose, panel, intr));
    frame = render::apply_rolling_shutter(frame, quad, dm_encode(LedId{id}), phase);
    return {frame, quad};
}

std::vector<int> decode_frame(const Capture& c) {
    const geom::CameraIntrinsics intr;
    return dm_decode(extract_row_profile(c.frame, c.quad), intr.row_readout_us, intr.exposure_us);
}

}  // namespace

TEST_CASE("encoder hand traces") {
    const auto zeros = dm_encode(LedId{0x00});
    REQUIRE(zeros.levels().size() == 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(zeros.levels()[i] == (i % 2 == 0));
    const auto ones = dm_encode(LedId{0xFF});
    for (std::size_t i = 0; i < 16; ++i) CHECK(ones.levels()[i] == (i % 4 < 2));
    CHECK(zeros.level_duration_us() == 50.0);
    CHECK(dm_encode(LedId{1}, 5000.0).level_duration_us() == 100.0);
    CHECK(zeros.repeating());
}

TEST_CASE("every id: 16 levels, boundary transitions, DC balance, short runs") {
    for (int v = 0; v < 256; ++v) {
        const auto w = dm_encode(LedId{static_cast<std::uint8_t>(v)});
        REQUIRE(w.levels().size() == 16);
        CHECK(w.levels()[0]);
        const auto bits = LedId{static_cast<std::uint8_t>(v)}.bits();
        int boundary = 0;
        const std::size_t p = w.period_levels();
        for (std::size_t b = 0; b < 8; ++b) {
            const std::size_t last = 2 * b + 1, next = 2 * b + 2;
            if (w.level_at(last) != w.level_at(next % p)) ++boundary;
            CHECK((w.level_at(2 * b) != w.level_at(2 * b + 1)) == (bits[b] == 0));
        }
        CHECK(boundary == 8);
        CHECK(w.duty_cycle() == 0.5);
        // Runs over two periods, skipping the clipped ends.
        std::vector<int> runs;
        int len = 1;
        for (std::size_t i = 1; i < 2 * p; ++i) {
            if (w.level_at(i) == w.level_at(i - 1)) ++len;
            else {
                runs.push_back(len);
                len = 1;
            }
        }
        for (std::size_t k = 1; k < runs.size(); ++k) CHECK((runs[k] == 1 || runs[k] == 2));
    }
}

TEST_CASE("bits are MSB first") {
    const auto b = LedId{0x5A}.bits();
    CHECK(b == std::array<int, 8>{0, 1, 0, 1, 1, 0, 1, 0});
}

TEST_CASE("row profiles") {
    const geom::CameraIntrinsics intr;
    const Pose pose{{0, 0, 1.66}, Attitude()};
    const auto quad = geom::project_panel_corners(intr, pose, geom::LedPanel{});
    const auto flat = render::rasterize_quad(quad, intr.width_px, intr.height_px, render::frame_meta(intr), 1.0);
    const auto p = extract_row_profile(flat, quad);
    CHECK(p.values.size() > 500);
    for (double v : p.values) CHECK(v == 1.0);
    CHECK_THROWS_AS(dm_decode(p, intr.row_readout_us, intr.exposure_us), NoTransitions);

    const auto w = dm_encode(LedId{0x5A});
    const auto striped = render::apply_rolling_shutter(flat, quad, w, 0.0);
    const auto s = extract_row_profile(striped, quad);
    const auto period_rows = static_cast<std::size_t>(w.period_us() / intr.row_readout_us);
    CHECK(period_rows == 160);
    for (std::size_t i = 0; i + period_rows < s.values.size(); ++i) CHECK(s.values[i] == s.values[i + period_rows]);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double f = render::row_exposure_fraction(w, (s.first_row + static_cast<double>(i)) * 5.0, 68.0);
        CHECK(s.values[i] == std::lround(255 * f) / 255.0);
    }
    const geom::CornerSet outside{{{{-100, -100}, {-10, -100}, {-10, -10}, {-100, -10}}}};
    CHECK_THROWS_AS(extract_row_profile(flat, outside), EmptyQuad);
}

TEST_CASE("all ids round trip at nadir, 1.66 m") {
    for (int v = 0; v < 256; ++v) {
        const auto id = static_cast<std::uint8_t>(v);
        const auto bits = decode_frame(nadir_capture(id, 1.66, 0.0));
        CHECK(bits.size() >= 8);
        CHECK(is_rotation_of(bits, id));
    }
}

TEST_CASE("decoding survives profile noise") {
    const geom::CameraIntrinsics intr;
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int v = 0; v < 256; ++v) {
        const auto c = nadir_capture(static_cast<std::uint8_t>(v), 1.66, 13.0);
        auto profile = extract_row_profile(c.frame, c.quad);
        const auto clean = dm_decode(profile, intr.row_readout_us, intr.exposure_us);
        for (double& x : profile.values) x += noise(rng);
        CHECK(dm_decode(profile, intr.row_readout_us, intr.exposure_us) == clean);
    }
}

TEST_CASE("short profiles") {
    RowProfile p;
    p.values.assign(150, 0.5);
    CHECK_THROWS_AS(dm_decode(p, 5.0, 68.0), ProfileTooShort);
}

TEST_CASE("rotation matching") {
    const LedDatabase db({LedRecord{LedId{0x5A}, {1, 2, 2.56}}});
    const auto pattern = LedId{0x5A}.bits();
    std::vector<int> rotated(8);
    for (int i = 0; i < 8; ++i) rotated[i] = pattern[(i + 3) % 8];
    CHECK(match_id(rotated, db).id.value == 0x5A);
    CHECK_THROWS_AS(match_id({1, 1, 1, 1, 1, 1, 1, 1}, db), NoMatch);
    CHECK_THROWS_AS(match_id({0, 1, 0}, db), NoMatch);
}

TEST_CASE("cyclic equivalence") {
    for (int a = 0; a < 256; a += 7)
        for (int b = 0; b < 256; ++b)
            CHECK(cyclically_equivalent(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)) ==
                  equivalent_oracle(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)));
    REQUIRE(equivalent_oracle(0x0F, 0xF0));
    CHECK_THROWS_AS(LedDatabase({LedRecord{LedId{0x0F}, {}}, LedRecord{LedId{0xF0}, {}}}), AmbiguousMatch);
    CHECK_THROWS_AS(LedDatabase({LedRecord{LedId{0x11}, {}}, LedRecord{LedId{0x11}, {}}}), AmbiguousMatch);

    const auto reps = rotation_class_representatives();
    CHECK(reps.size() == 36);
    for (int v = 0; v < 256; ++v) {
        int classes = 0;
        for (auto r : reps) classes += equivalent_oracle(r, static_cast<std::uint8_t>(v));
        CHECK(classes == 1);
    }
    std::vector<LedRecord> all;
    for (auto r : reps) all.push_back({LedId{r}, {}});
    CHECK_NOTHROW(LedDatabase{all});
}

TEST_CASE("decode is phase invariant") {
    const auto reps = rotation_class_representatives();
    std::vector<LedRecord> records;
    for (auto r : reps) records.push_back({LedId{r}, {double(r), 0, 2.56}});
    const LedDatabase db(records);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> phase(0.0, 1600.0);
    for (auto id : {reps[3], reps[17], reps[35], std::uint8_t{0x5A}}) {
        std::uint8_t rep = 0;
        for (auto r : reps)
            if (equivalent_oracle(r, id)) rep = r;
        for (int k = 0; k < 12; ++k) CHECK(match_id(decode_frame(nadir_capture(id, 1.3, phase(rng))), db).id.value == rep);
    }
}

TEST_CASE("database CSV") {
    const auto db = LedDatabase::parse_csv("id,x,y,z\n0x5A,1.5,2,2.56\n7,0,0,3.0\n");
    REQUIRE(db.records().size() == 2);
    CHECK(db.records()[0].id.value == 0x5A);
    CHECK(db.records()[0].world_position == geom::Vec3{1.5, 2, 2.56});
    CHECK(db.records()[1].mount_height_m == 3.0);
    CHECK_THROWS_AS(LedDatabase::parse_csv("id,x,y,z\n0x5A,1,2\n"), MalformedCsv);
    CHECK_THROWS_AS(LedDatabase::parse_csv("id,x,y,z\n300,1,2,3\n"), MalformedCsv);
    CHECK_THROWS_AS(LedDatabase::parse_csv("id,x,y,z\nzz,1,2,3\n"), MalformedCsv);
}

TEST_CASE("receiver to world") {
    const LedRecord a{LedId{1}, {5, 5, 2.56}};
    const geom::Vec3 w = rcs_to_wcs({0, 0, 1.3}, a);
    CHECK(w.x == 5.0);
    CHECK(w.y == 5.0);
    CHECK(w.z == doctest::Approx(1.26));
    CHECK(rcs_to_wcs({}, a) == a.world_position);
    const LedRecord b{LedId{2}, {-1, 3, 2.8}};
    const geom::Vec3 fix{0.2, -0.1, 1.6};
    const geom::Vec3 d = rcs_to_wcs(fix, b) - rcs_to_wcs(fix, a);
    CHECK(d.x == doctest::Approx(-6.0));
    CHECK(d.y == doctest::Approx(-2.0));
    CHECK(d.z == doctest::Approx(0.24));
}
