#include <doctest.h>

#include <cmath>
#include <random>

#include "vlp/config.hpp"
#include "vlp/errors.hpp"
#include "vlp/geometry.hpp"

using namespace vlp;
using namespace vlp::geom;

namespace {

// Elementary rotations written out independently of the library.
std::array<std::array<double, 3>, 3> mul(const std::array<std::array<double, 3>, 3>& a,
                                         const std::array<std::array<double, 3>, 3>& b) {
    std::array<std::array<double, 3>, 3> c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

std::array<std::array<double, 3>, 3> oracle_rotation(double roll, double pitch, double yaw) {
    const double d = M_PI / 180.0;
    const double cr = std::cos(roll * d), sr = std::sin(roll * d);
    const double cp = std::cos(pitch * d), sp = std::sin(pitch * d);
    const double cy = std::cos(yaw * d), sy = std::sin(yaw * d);
    std::array<std::array<double, 3>, 3> rx{{{1, 0, 0}, {0, cr, -sr}, {0, sr, cr}}};
    std::array<std::array<double, 3>, 3> ry{{{cp, 0, sp}, {0, 1, 0}, {-sp, 0, cp}}};
    std::array<std::array<double, 3>, 3> rz{{{cy, -sy, 0}, {sy, cy, 0}, {0, 0, 1}}};
    return mul(mul(rz, ry), rx);
}

Attitude random_attitude(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> deg(-720.0, 720.0);
    return Attitude(deg(rng), deg(rng), deg(rng));
}

bool same_points(const CornerSet& a, const CornerSet& b, double tol) {
    for (int k = 0; k < 4; ++k)
        if (std::abs(a.points[k].u - b.points[k].u) > tol || std::abs(a.points[k].v - b.points[k].v) > tol)
            return false;
    return true;
}

}  // namespace

TEST_CASE("attitude normalizes into [0, 360)") {
    const Attitude a(-90.0, 360.0, 725.0);
    CHECK(a.roll() == doctest::Approx(270.0));
    CHECK(a.pitch() == 0.0);
    CHECK(a.yaw() == doctest::Approx(5.0));
    CHECK_THROWS_AS(Attitude(NAN, 0, 0), std::invalid_argument);
    CHECK(normalize_degrees(-1e-20) < 360.0);
}

TEST_CASE("identity and quarter-turn attitudes") {
    const Mat3 r = attitude_to_matrix(Attitude(0, 0, 0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(r(i, j) == (i == j ? 1.0 : 0.0));
    const Vec3 x = attitude_to_matrix(Attitude(0, 0, 90)) * Vec3{1, 0, 0};
    CHECK(x.x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(x.y == doctest::Approx(1.0));
    CHECK(x.z == doctest::Approx(0.0));
}

TEST_CASE("attitude matrix matches composed elementary rotations") {
    const auto want = oracle_rotation(30, 45, 60);
    const Mat3 got = attitude_to_matrix(Attitude(30, 45, 60));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(got(i, j) - want[i][j]) < 1e-12);
}

TEST_CASE("rotation matrices are orthonormal with det +1") {
    std::mt19937_64 rng(7);
    for (int n = 0; n < 1000; ++n) {
        const Mat3 r = attitude_to_matrix(random_attitude(rng));
        const Mat3 p = r.transpose() * r;
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
        CHECK(worst < 1e-12);
        CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("matrix_to_attitude inverts attitude_to_matrix") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> a(0.0, 360.0), p(-80.0, 80.0);
    for (int n = 0; n < 200; ++n) {
        const Attitude att(a(rng), p(rng), a(rng));
        const Mat3 r1 = attitude_to_matrix(att);
        const Mat3 r2 = attitude_to_matrix(matrix_to_attitude(r1));
        for (int k = 0; k < 9; ++k) CHECK(std::abs(r1.m[k] - r2.m[k]) < 1e-12);
    }
}

TEST_CASE("identity camera looks up at the panel") {
    const Vec3 bore = camera_to_lcs(Attitude()) * Vec3{0, 0, 1};
    CHECK(bore.z == doctest::Approx(-1.0));
}

TEST_CASE("pinhole projection of a panel corner") {
    const CameraIntrinsics intr;
    const Pose pose{{0, 0, 1.3}, Attitude()};
    const PixelPoint p = project_point(intr, pose, {0.2975, 0.2975, 0});
    const double off = 1600.0 * 0.2975 / 1.3;
    CHECK(std::abs(off - 366.15384615384613) < 1e-9);
    CHECK(p.u == doctest::Approx(864.0 + off).epsilon(1e-14));
    CHECK(p.v == doctest::Approx(1152.0 - off).epsilon(1e-14));
}

TEST_CASE("panel centre projects to the principal point") {
    const CameraIntrinsics intr;
    for (double d : {0.3, 1.3, 2.56, 10.0}) {
        const PixelPoint p = project_point(intr, {{0, 0, d}, Attitude()}, {0, 0, 0});
        CHECK(p.u == intr.cx_px);
        CHECK(p.v == intr.cy_px);
    }
}

TEST_CASE("points behind the camera are rejected") {
    const CameraIntrinsics intr;
    CHECK_THROWS_AS(project_point(intr, {{0, 0, 1.3}, Attitude()}, {0, 0, 2.0}), BehindCamera);
    CHECK_THROWS_AS(project_point(intr, {{0, 0, 1.3}, Attitude()}, {0, 0, 1.3}), BehindCamera);
    CHECK_THROWS_AS(project_panel_corners(intr, {{0, 0, 1.3}, Attitude(0, 90, 0)}, LedPanel{}), BehindCamera);
}

TEST_CASE("nadir corners are symmetric about the principal point") {
    const CameraIntrinsics intr;
    const CornerSet c = project_panel_corners(intr, {{0, 0, 1.7}, Attitude()}, LedPanel{});
    double su = 0, sv = 0;
    for (const auto& p : c.points) {
        su += p.u - intr.cx_px;
        sv += p.v - intr.cy_px;
    }
    CHECK(std::abs(su) < 1e-9);
    CHECK(std::abs(sv) < 1e-9);
}

TEST_CASE("translated nadir camera matches the closed-form pinhole") {
    const CameraIntrinsics intr;
    const LedPanel panel;
    const double h = panel.side_m / 2, z = 1.3, dx = 0.1;
    const CornerSet c = project_panel_corners(intr, {{dx, 0, z}, Attitude()}, panel);
    const CornerSet c0 = project_panel_corners(intr, {{0, 0, z}, Attitude()}, panel);
    for (int k = 0; k < 4; ++k) CHECK(c.points[k].u - c0.points[k].u == doctest::Approx(-1600.0 * dx / z));
    // Expected corner set from u = cx + fx (X - x) / z, v = cy - fy (Y - y) / z.
    std::vector<std::pair<double, double>> want;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0}) want.push_back({864.0 + 1600.0 * (sx * h - dx) / z, 1152.0 - 1600.0 * sy * h / z});
    for (const auto& p : c.points) {
        bool found = false;
        for (const auto& w : want) found |= std::abs(p.u - w.first) < 1e-9 && std::abs(p.v - w.second) < 1e-9;
        CHECK(found);
    }
}

TEST_CASE("back-projection recovers panel corners") {
    const CameraIntrinsics intr;
    const LedPanel panel;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xy(-0.6, 0.6), z(1.0, 2.0), ang(-25.0, 25.0);
    int checked = 0;
    while (checked < 300) {
        const Pose pose{{xy(rng), xy(rng), z(rng)}, Attitude(ang(rng), ang(rng), 360.0 * (ang(rng) + 25.0) / 50.0)};
        CornerSet c;
        try {
            c = project_panel_corners(intr, pose, panel);
        } catch (const BehindCamera&) {
            continue;
        }
        if (!in_fov(c, intr)) continue;
        ++checked;
        for (const auto& p : c.points) {
            const auto back = backproject_to_panel_plane(intr, pose, p);
            REQUIRE(back.has_value());
            double best = 1e9;
            for (const auto& corner : panel_corners_lcs(panel)) best = std::min(best, (*back - corner).norm());
            CHECK(best < 1e-9);
        }
    }
}

TEST_CASE("scaling the scene leaves the projection unchanged") {
    const CameraIntrinsics intr;
    LedPanel big;
    big.side_m = 2 * big.side_m;
    for (double z : {1.23, 1.3, 1.6, 1.66}) {
        const Attitude att(4, -7, 33);
        const CornerSet small_scene = project_panel_corners(intr, {{0.2, -0.4, z}, att}, LedPanel{});
        const CornerSet big_scene = project_panel_corners(intr, {{0.4, -0.8, 2 * z}, att}, big);
        CHECK(same_points(small_scene, big_scene, 1e-9));
    }
}

TEST_CASE("doubling the focal length doubles offsets from the principal point") {
    CameraIntrinsics a, b;
    b.fx_px = 2 * a.fx_px;
    b.fy_px = 2 * a.fy_px;
    const Pose pose{{0.15, -0.1, 1.6}, Attitude()};
    const CornerSet ca = project_panel_corners(a, pose, LedPanel{});
    const CornerSet cb = project_panel_corners(b, pose, LedPanel{});
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(cb.points[k].u - b.cx_px == doctest::Approx(2 * (ca.points[k].u - a.cx_px)).epsilon(1e-12));
        CHECK(cb.points[k].v - b.cy_px == doctest::Approx(2 * (ca.points[k].v - a.cy_px)).epsilon(1e-12));
    }
}

TEST_CASE("in_fov bounds") {
    const CameraIntrinsics intr;
    CornerSet c;
    for (auto& p : c.points) p = {864, 1152};
    CHECK(in_fov(c, intr));
    c.points[2].u = -3;
    CHECK_FALSE(in_fov(c, intr));
    c.points[2] = {0.0, 0.0};
    CHECK(in_fov(c, intr));
    c.points[2] = {1728.0, 5.0};
    CHECK_FALSE(in_fov(c, intr));
}

TEST_CASE("shrinking the panel never loses visibility") {
    const CameraIntrinsics intr;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> xy(-1.0, 1.0), ang(-40.0, 40.0);
    LedPanel small;
    small.side_m = 0.3;
    for (int n = 0; n < 2000; ++n) {
        const Pose pose{{xy(rng), xy(rng), 1.3}, Attitude(ang(rng), ang(rng), 4.5 * ang(rng))};
        try {
            if (in_fov(project_panel_corners(intr, pose, LedPanel{}), intr))
                CHECK(in_fov(project_panel_corners(intr, pose, small), intr));
        } catch (const BehindCamera&) {
        }
    }
}

TEST_CASE("canonical position agrees across the panel's quarter-turn symmetry") {
    const CameraIntrinsics intr;
    const LedPanel panel;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> xy(-0.6, 0.6), tilt(-10.0, 10.0), yaw(0.0, 360.0);
    for (int n = 0; n < 200; ++n) {
        const Pose a{{xy(rng), xy(rng), 1.5}, Attitude(tilt(rng), tilt(rng), yaw(rng))};
        // Turning the whole scene a quarter turn about the panel axis maps the
        // panel onto itself.
        const Mat3 q = rot_z(90.0);
        const Pose b{q * a.position, matrix_to_attitude(q * attitude_to_matrix(a.attitude))};
        const CornerSet ca = project_panel_corners(intr, a, panel);
        const CornerSet cb = project_panel_corners(intr, b, panel);
        CHECK(same_points(ca, cb, 1e-7));
        const Vec3 pa = canonical_position(a), pb = canonical_position(b);
        CHECK((pa - pb).norm() < 1e-9);
        CHECK(pa.z == a.position.z);
    }
    const Pose plain{{0.1, 0.2, 1.3}, Attitude(0, 0, 10)};
    CHECK(canonical_position(plain) == plain.position);
}

TEST_CASE("default intrinsics are valid and 3:4") {
    const CameraIntrinsics intr;
    CHECK_NOTHROW(intr.validate());
    CHECK(intr.width_px * 4 == intr.height_px * 3);
    CameraIntrinsics bad = intr;
    bad.cx_px = intr.width_px;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = intr;
    bad.row_readout_us = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    LedPanel p;
    CHECK_NOTHROW(p.validate());
    const auto corners = panel_corners_lcs(p);
    for (const auto& c : corners) {
        CHECK(std::abs(c.x) == doctest::Approx(0.2975));
        CHECK(std::abs(c.y) == doctest::Approx(0.2975));
        CHECK(c.z == 0.0);
    }
}

TEST_CASE("config parsing and camera keys") {
    const auto cfg = KeyValueConfig::parse("# camera\ncamera.fx_px = 1200  # override\ncamera.width_px=900\nflag = yes\nlist = 1, 2.5 ,3\n");
    CHECK(cfg.get_double("camera.fx_px", 0) == 1200.0);
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_doubles("list", {}) == std::vector<double>{1, 2.5, 3});
    CHECK(cfg.get_int("missing", 4) == 4);
    const auto intr = intrinsics_from_config(cfg);
    CHECK(intr.fx_px == 1200.0);
    CHECK(intr.cx_px == 450.0);
    CHECK(intr.fy_px == 1600.0);

    try {
        (void)KeyValueConfig::parse("camera.fy_px = abc").get_double("camera.fy_px", 0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("camera.fy_px") != std::string::npos);
    }
    CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign"), ConfigError);
    CHECK_THROWS_AS(intrinsics_from_config(KeyValueConfig::parse("camera.fx_px = -1")), ConfigError);
    CHECK(KeyValueConfig::parse("id = 0x5A").get_u64("id", 0) == 0x5A);
}

TEST_CASE("pose CSV") {
    const auto poses = parse_pose_csv("x,y,z,roll,pitch,yaw\n0.1,0.2,1.3,0,0,90\n\n-0.2,0,1.66,10,-5,370\n");
    REQUIRE(poses.size() == 2);
    CHECK(poses[0].position == Vec3{0.1, 0.2, 1.3});
    CHECK(poses[0].attitude.yaw() == 90.0);
    CHECK(poses[1].attitude.pitch() == doctest::Approx(355.0));
    CHECK(poses[1].attitude.yaw() == doctest::Approx(10.0));
    CHECK_THROWS_AS(parse_pose_csv("1,2,3\n"), MalformedCsv);
    CHECK_THROWS_AS(parse_pose_csv("1,2,3,a,5,6\n"), MalformedCsv);
}
