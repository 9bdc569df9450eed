#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "vlp/errors.hpp"
#include "vlp/harness/study.hpp"

using namespace vlp;
using namespace vlp::harness;
using geom::Attitude;

namespace {

// Nadir pinhole written out by hand: camera axes are the LCS axes turned by
// yaw about z, with camera y and z flipped.
bool nadir_visible_oracle(double x, double y, double z, double yaw_deg) {
    const geom::CameraIntrinsics intr;
    const double h = geom::LedPanel{}.side_m / 2;
    const double c = std::cos(yaw_deg * M_PI / 180), s = std::sin(yaw_deg * M_PI / 180);
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0}) {
            const double dx = sx * h - x, dy = sy * h - y, dz = -z;
            const double cx = c * dx + s * dy, cy = -(-s * dx + c * dy), cz = -dz;
            const double u = intr.fx_px * cx / cz + intr.cx_px, v = intr.fy_px * cy / cz + intr.cy_px;
            if (!(u >= 0 && u < intr.width_px && v >= 0 && v < intr.height_px)) return false;
        }
    return true;
}

Dataset toy_dataset(int locations, int per_location, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset ds;
    for (int l = 0; l < locations; ++l)
        for (int s = 0; s < per_location; ++s) {
            DatasetRow r;
            r.grid_i = l % 3;
            r.grid_j = l / 3;
            r.height_m = l % 2 ? 1.3 : 1.66;
            r.sample = s;
            r.target = {u(rng), u(rng), r.height_m};
            for (auto& f : r.features) f = 1000 * u(rng);
            ds.rows.push_back(r);
        }
    return ds;
}

KeyValueConfig tiny_config(const std::string& study) {
    auto cfg = KeyValueConfig::parse(
        "seed = 17\n"
        "grid.extent_m = 0.2\n"
        "grid.spacing_m = 0.2\n"
        "capture.per_location = 4\n"
        "forest.n_trees = 5\n"
        "gbt.rounds = 10\n"
        "mlp.hidden = 8, 8\n"
        "mlp.epochs = 5\n"
        "sweep.angle_step_deg = 90\n");
    cfg.set("study", study);
    return cfg;
}

}  // namespace

TEST_CASE("grid spec") {
    const GridSpec g;
    CHECK(g.count() == 7);
    CHECK(g.coordinate(0) == doctest::Approx(-0.6));
    CHECK(g.coordinate(3) == 0.0);
    CHECK(g.coordinate(6) == doctest::Approx(0.6));
    CHECK_THROWS_AS((GridSpec{1.0, 0.3}.count()), ConfigError);
    CHECK_THROWS_AS((GridSpec{1.0, 0.0}.count()), ConfigError);
    CHECK((GridSpec{0.0, 0.2}.count()) == 1);
}

TEST_CASE("sweep spec validation") {
    SweepSpec s;
    CHECK_NOTHROW(s.validate());
    CHECK(s.steps() == 8);
    s.angle_step_deg = 50;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.angle_step_deg = 45;
    s.heights_m = {1.3, -1.0};
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("attitude sweep counts") {
    const SweepSpec spec;
    const geom::CameraIntrinsics intr;
    const geom::LedPanel panel;
    const Dataset ds = generate_sweep(spec, intr, panel);
    CHECK(ds.candidates == 49 * 2 * 512);
    CHECK(ds.candidates == ds.rejected_fov + static_cast<long long>(ds.rows.size()));
    long long low = 0, high = 0;
    for (const auto& r : ds.rows) {
        (r.height_m == 1.3 ? low : high) += 1;
        CHECK(r.source == SourceTag::CleanSim);
    }
    CHECK(low < high);
    CHECK(low > 0);

    std::set<std::tuple<int, int, double, double>> nadir;
    for (const auto& r : ds.rows)
        if (r.attitude.roll() == 0 && r.attitude.pitch() == 0)
            nadir.insert({r.grid_i, r.grid_j, r.height_m, r.attitude.yaw()});
    for (double h : spec.heights_m)
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j)
                for (int k = 0; k < 8; ++k) {
                    const bool want = nadir_visible_oracle(spec.grid.coordinate(i), spec.grid.coordinate(j), h, 45.0 * k);
                    CHECK(nadir.count({i, j, h, 45.0 * k}) == (want ? 1u : 0u));
                }
    // Near the centre every nadir heading is in view.
    CHECK(nadir.count({3, 3, 1.3, 45.0}) == 1);
}

TEST_CASE("sweep rows carry ray-cast features and canonical targets") {
    SweepSpec spec;
    spec.heights_m = {1.6};
    spec.angle_step_deg = 90;
    const geom::CameraIntrinsics intr;
    const Dataset ds = generate_sweep(spec, intr, geom::LedPanel{});
    REQUIRE(!ds.rows.empty());
    for (const auto& r : ds.rows) {
        const geom::Pose pose{{spec.grid.coordinate(r.grid_i), spec.grid.coordinate(r.grid_j), r.height_m}, r.attitude};
        CHECK(r.features == vision::features(geom::project_panel_corners(intr, pose, geom::LedPanel{})));
        CHECK((r.target - geom::canonical_position(pose)).norm() == 0.0);
    }
}

TEST_CASE("split is an exact partition") {
    const Dataset ds = toy_dataset(9, 10, 1);
    const Split s = split(ds, 2, 77);
    CHECK(s.test.rows.size() == 18);
    CHECK(s.train.rows.size() == 72);
    std::map<LocationKey, int> per;
    std::multiset<std::tuple<double, int, int, int>> seen;
    for (const auto& r : s.test.rows) {
        ++per[{r.height_m, r.grid_i, r.grid_j}];
        seen.insert({r.height_m, r.grid_i, r.grid_j, r.sample});
    }
    for (const auto& [k, n] : per) CHECK(n == 2);
    for (const auto& r : s.train.rows) seen.insert({r.height_m, r.grid_i, r.grid_j, r.sample});
    CHECK(seen.size() == 90);
    CHECK(std::set<std::tuple<double, int, int, int>>(seen.begin(), seen.end()).size() == 90);

    CHECK(split(ds, 0, 1).test.rows.empty());
    CHECK(split(ds, 0, 1).train.rows.size() == 90);
    CHECK_THROWS_AS(split(ds, 11, 1), InsufficientRows);
    const Split again = split(ds, 2, 77);
    CHECK(dataset_to_csv(again.test) == dataset_to_csv(s.test));
    CHECK_FALSE(dataset_to_csv(split(ds, 2, 78).test) == dataset_to_csv(s.test));
}

TEST_CASE("sparse locations are dropped") {
    Dataset ds = toy_dataset(4, 3, 2);
    ds.rows.erase(ds.rows.begin() + 3, ds.rows.begin() + 5);
    const Dataset kept = drop_sparse_locations(ds, 3);
    CHECK(kept.rows.size() == 9);
}

TEST_CASE("error metric") {
    CHECK(error_3d({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(error_3d({0, 0, 0}, {0.03, 0.04, 0}) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(error_3d({0.1, -0.3, 1.2}, {0.4, 0.2, 1.7}) == error_3d({0.4, 0.2, 1.7}, {0.1, -0.3, 1.2}));
}

TEST_CASE("CDF and quantiles") {
    const auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0});
    REQUIRE(cdf.size() == 5);
    CHECK(cdf[0].error_cm == 0.0);
    CHECK(cdf[0].fraction == 0.0);
    CHECK(cdf.back().fraction == 1.0);
    for (std::size_t k = 1; k < cdf.size(); ++k) {
        CHECK(cdf[k].error_cm >= cdf[k - 1].error_cm);
        CHECK(cdf[k].fraction >= cdf[k - 1].fraction);
    }
    std::vector<double> v(10);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(quantile(v, 0.9) == 9.0);
    CHECK(quantile(v, 0.91) == 10.0);
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile({4.0}, 0.9) == 4.0);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("evaluation reports") {
    const Dataset ds = toy_dataset(6, 5, 3);
    std::vector<geom::Vec3> perfect;
    for (const auto& r : ds.rows) perfect.push_back(r.target);
    const auto zero = evaluate_predictions(perfect, ds, "perfect");
    CHECK(zero.error_3d.mean_cm == 0.0);
    CHECK(zero.error_3d.p90_cm == 0.0);
    CHECK(zero.error_3d.max_cm == 0.0);
    for (const auto& a : zero.axis) CHECK(a.max_cm == 0.0);

    Dataset one;
    one.rows.push_back(ds.rows[0]);
    auto shifted = ds.rows[0].target;
    shifted.x += 0.07;
    const auto single = evaluate_predictions({shifted}, one);
    CHECK(single.error_3d.mean_cm == doctest::Approx(7.0));
    CHECK(single.error_3d.p90_cm == single.error_3d.mean_cm);
    CHECK(single.error_3d.max_cm == single.error_3d.mean_cm);
    REQUIRE(single.cdf_3d.size() == 2);
    CHECK(single.cdf_3d[1].error_cm == single.error_3d.mean_cm);
    CHECK(single.cdf_3d[1].fraction == 1.0);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 0.02);
    std::vector<geom::Vec3> noisy;
    double total = 0.0;
    for (const auto& r : ds.rows) {
        noisy.push_back({r.target.x + n(rng), r.target.y + n(rng), r.target.z + n(rng)});
        const auto d = noisy.back() - r.target;
        total += 100.0 * std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    }
    const auto rep = evaluate_predictions(noisy, ds, "noisy");
    CHECK(rep.error_3d.mean_cm == doctest::Approx(total / static_cast<double>(ds.rows.size())).epsilon(1e-12));
    double weighted = 0.0;
    int count = 0;
    for (const auto& c : rep.grid) {
        weighted += c.mean_error_cm * c.count;
        count += c.count;
    }
    CHECK(count == rep.rows);
    CHECK(std::abs(weighted / count - rep.error_3d.mean_cm) < 1e-9);
    for (const auto* cdf : {&rep.cdf_3d, &rep.cdf_axis[0], &rep.cdf_axis[1], &rep.cdf_axis[2]}) {
        CHECK(cdf->front().fraction == 0.0);
        CHECK(cdf->back().fraction == 1.0);
        for (std::size_t k = 1; k < cdf->size(); ++k) CHECK((*cdf)[k].fraction >= (*cdf)[k - 1].fraction);
    }
    CHECK_THROWS_AS(evaluate_predictions({}, Dataset{}), EmptyTestSet);

    const std::string json = report_to_json(rep);
    CHECK(json.find("\"p90_cm\"") != std::string::npos);
    CHECK(cdf_to_csv(rep).rfind("curve,error_cm,fraction\n", 0) == 0);
    CHECK(grid_to_csv(rep).rfind("grid_i,grid_j,count,mean_error_cm\n", 0) == 0);
    const std::string svg = grid_to_svg(rep, 1.2, 0.2);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("dataset CSV round trip") {
    Dataset ds = toy_dataset(3, 2, 5);
    ds.rows[1].attitude = Attitude(1.25, 359.5, 0.1);
    ds.rows[2].source = SourceTag::NoisySim;
    const std::string csv = dataset_to_csv(ds);
    CHECK(csv.rfind("x,y,z,roll,pitch,yaw,grid_i,grid_j,height,u1,v1,u2,v2,u3,v3,u4,v4,source", 0) == 0);
    const Dataset back = dataset_from_csv(csv);
    CHECK(dataset_to_csv(back) == csv);
    REQUIRE(back.rows.size() == ds.rows.size());
    CHECK(back.rows[2].source == SourceTag::NoisySim);
    CHECK(back.rows[1].attitude == ds.rows[1].attitude);
    CHECK_THROWS_AS(dataset_from_csv("x,y,z\n1,2\n"), MalformedCsv);
    CHECK_THROWS_AS(dataset_from_csv("nonsense\n"), MalformedCsv);
    CHECK(features_to_csv({{1, 2, 3, 4, 5, 6, 7, 8.5}}) == "u1,v1,u2,v2,u3,v3,u4,v4\n1,2,3,4,5,6,7,8.5\n");
}

TEST_CASE("capture attitudes stay within the configured spread") {
    CaptureSpec c;
    c.yaw_spread_deg = 5.0;
    c.tilt_max_deg = 2.0;
    Rng rng(3);
    for (int k = 0; k < 500; ++k) {
        const auto att = draw_capture_attitude(c, rng);
        const geom::Vec3 bore = geom::camera_to_lcs(att) * geom::Vec3{0, 0, 1};
        CHECK(std::acos(-bore.z) * 180 / M_PI <= 2.0 + 1e-9);
        const double heading = geom::camera_heading_deg(att);
        const double wrapped = heading > 180 ? heading - 360 : heading;
        CHECK(std::abs(wrapped) < 5.0 + 2.5);
    }
}

TEST_CASE("clean captures reproduce the ray-cast labels") {
    SweepSpec spec;
    spec.heights_m = {1.3, 1.66};
    spec.grid = {0.4, 0.2};
    spec.seed = 5;
    const geom::CameraIntrinsics intr;
    const geom::LedPanel panel;
    CaptureSpec c;
    c.per_location = 3;
    c.noise = {};
    c.modulated = false;
    const Dataset ds = generate_capture_set(spec, intr, panel, c);
    CHECK(ds.candidates == 2 * 9 * 3);
    CHECK(static_cast<long long>(ds.rows.size()) + ds.rejected_fov + ds.vision_failures == ds.candidates);
    CHECK(ds.rows.size() >= 40);
    for (const auto& r : ds.rows) {
        const geom::Pose pose{{spec.grid.coordinate(r.grid_i), spec.grid.coordinate(r.grid_j), r.height_m}, r.attitude};
        const auto label = vision::features(geom::project_panel_corners(intr, pose, panel));
        for (int k = 0; k < 8; ++k) CHECK(std::abs(r.features[k] - label[k]) < 2.0);
        CHECK(r.source == SourceTag::NoisySim);
    }
    CaptureSpec threaded = c;
    threaded.threads = 3;
    CHECK(dataset_to_csv(generate_capture_set(spec, intr, panel, threaded)) == dataset_to_csv(ds));
}

TEST_CASE("noise does not change the capture poses") {
    SweepSpec spec;
    spec.heights_m = {1.6};
    spec.grid = {0.2, 0.2};
    spec.seed = 9;
    const geom::CameraIntrinsics intr;
    const geom::LedPanel panel;
    CaptureSpec noisy;
    noisy.per_location = 2;
    noisy.vision.close_radius = vision::default_close_radius(intr.row_readout_us, noisy.bit_rate_hz);
    CaptureSpec clean = noisy;
    clean.noise = {};
    const Dataset a = generate_capture_set(spec, intr, panel, noisy);
    const Dataset b = generate_capture_set(spec, intr, panel, clean);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        CHECK(a.rows[k].attitude == b.rows[k].attitude);
        CHECK(a.rows[k].sample == b.rows[k].sample);
    }
    const Dataset again = rerender_captures(a, spec, intr, panel, clean);
    CHECK(dataset_to_csv(again) == dataset_to_csv(b));
    CHECK(dataset_to_csv(generate_capture_set(spec, intr, panel, noisy)) == dataset_to_csv(a));
}

TEST_CASE("config errors name the key") {
    auto expect_key = [](const KeyValueConfig& cfg, const std::string& key) {
        try {
            run_experiment(cfg, 1);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(key) != std::string::npos);
        }
    };
    auto cfg = tiny_config("model-selection");
    cfg.set("capture.per_locaton", "3");
    expect_key(cfg, "capture.per_locaton");
    cfg = tiny_config("model-selection");
    cfg.set("gbt.rounds", "many");
    expect_key(cfg, "gbt.rounds");
    expect_key(tiny_config("nonsense"), "study");
    cfg = tiny_config("height-generalization");
    cfg.set("test.heights", "1.56");
    expect_key(cfg, "test.heights");
    cfg = tiny_config("model-selection");
    cfg.set("grid.spacing_m", "0.15");
    expect_key(cfg, "grid");
}

TEST_CASE("studies are deterministic across thread counts") {
    for (const std::string study : {"model-selection", "sim-vs-capture", "height-generalization"}) {
        const auto cfg = tiny_config(study);
        const auto a = run_experiment(cfg, 1);
        const auto b = run_experiment(cfg, 3);
        CHECK(study_summary_json(a) == study_summary_json(b));
        REQUIRE(a.reports.size() == b.reports.size());
        for (std::size_t k = 0; k < a.reports.size(); ++k) CHECK(report_to_json(a.reports[k]) == report_to_json(b.reports[k]));
        CHECK(a.config.count("run.threads") == 0);
        if (study == "model-selection") {
            for (const char* name : {"forest", "gbt", "mlp"}) {
                CHECK(a.report(name).rows == a.report("gbt").rows);
                CHECK(a.report(name).errors_cm.size() == a.report("gbt").errors_cm.size());
            }
        }
        if (study == "height-generalization") {
            CHECK(a.report("sweep-trained@1.23").rows > 0);
            CHECK(a.report("sweep-trained@1.6").rows > 0);
        }
    }
}

TEST_CASE("study outputs on disk") {
    const auto result = run_experiment(tiny_config("height-generalization"), 1);
    const auto dir = std::filesystem::temp_directory_path() / "vlp_study_outputs_test";
    std::filesystem::remove_all(dir);
    const auto files = write_study_outputs(result, dir, GridSpec{0.2, 0.2});
    CHECK(files.size() == 4 * result.reports.size() + 1);
    for (const auto& f : files) CHECK(std::filesystem::file_size(f) > 0);
    CHECK(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);
}
