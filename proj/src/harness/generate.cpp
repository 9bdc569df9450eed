#include "vlp/harness/generate.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "vlp/errors.hpp"
#include "vlp/parallel.hpp"

namespace vlp::harness {

namespace {

constexpr std::uint64_t kCaptureTag = 0x63617074;  // "capt"
constexpr std::uint64_t kSplitTag = 0x73706c74;    // "splt"

std::uint64_t height_bits(double h) { return std::bit_cast<std::uint64_t>(h); }

// Rotation by `deg` about a unit axis in the xy plane.
geom::Mat3 tilt_about(double axis_deg, double deg) {
    const double a = axis_deg * M_PI / 180.0, t = deg * M_PI / 180.0;
    const double kx = std::cos(a), ky = std::sin(a);
    const double c = std::cos(t), s = std::sin(t), v = 1.0 - c;
    geom::Mat3 r;
    r(0, 0) = c + kx * kx * v;
    r(0, 1) = kx * ky * v;
    r(0, 2) = ky * s;
    r(1, 0) = kx * ky * v;
    r(1, 1) = c + ky * ky * v;
    r(1, 2) = -kx * s;
    r(2, 0) = -ky * s;
    r(2, 1) = kx * s;
    r(2, 2) = c;
    return r;
}

struct CaptureTask {
    double height_m;
    int grid_i;
    int grid_j;
    int sample;
};

enum class Outcome { Row, OutOfView, VisionFailed };

struct TaskResult {
    Outcome outcome = Outcome::OutOfView;
    DatasetRow row;
};

TaskResult run_capture_task(const CaptureTask& task, const SweepSpec& spec, const geom::CameraIntrinsics& intr,
                            const geom::LedPanel& panel, const CaptureSpec& capture,
                            const std::optional<render::Waveform>& waveform) {
    const std::uint64_t seed =
        derive_seed(spec.seed, {kCaptureTag, height_bits(task.height_m), static_cast<std::uint64_t>(task.grid_i),
                                static_cast<std::uint64_t>(task.grid_j), static_cast<std::uint64_t>(task.sample)});
    Rng rng(derive_seed(seed, {0}));
    const geom::Vec3 position{spec.grid.coordinate(task.grid_i), spec.grid.coordinate(task.grid_j), task.height_m};

    std::optional<geom::Pose> pose;
    for (int attempt = 0; attempt < capture.max_attempts && !pose; ++attempt) {
        geom::Pose candidate{position, draw_capture_attitude(capture, rng)};
        try {
            if (geom::in_fov(geom::project_panel_corners(intr, candidate, panel), intr)) pose = candidate;
        } catch (const Error&) {
        }
    }
    TaskResult result;
    if (!pose) return result;

    double phase = 0.0;
    if (waveform) phase = std::uniform_real_distribution<double>(0.0, waveform->period_us())(rng);

    const auto rc = render_capture(intr, *pose, panel, waveform, phase, capture.noise, derive_seed(seed, {1}));
    try {
        const auto corners = vision::extract_corners(rc.frame, capture.vision);
        result.row.features = vision::features(corners);
    } catch (const Error&) {
        result.outcome = Outcome::VisionFailed;
        return result;
    }
    result.outcome = Outcome::Row;
    result.row.target = geom::canonical_position(*pose);
    result.row.attitude = pose->attitude;
    result.row.grid_i = task.grid_i;
    result.row.grid_j = task.grid_j;
    result.row.height_m = task.height_m;
    result.row.source = SourceTag::NoisySim;
    result.row.sample = task.sample;
    return result;
}

Dataset run_capture_tasks(const std::vector<CaptureTask>& tasks, const SweepSpec& spec,
                          const geom::CameraIntrinsics& intr, const geom::LedPanel& panel,
                          const CaptureSpec& capture) {
    std::optional<render::Waveform> waveform;
    if (capture.modulated) waveform = codec::dm_encode(codec::LedId{capture.led_id}, capture.bit_rate_hz);

    std::vector<TaskResult> results(tasks.size());
    parallel_for(tasks.size(), capture.threads, [&](std::size_t k) {
        results[k] = run_capture_task(tasks[k], spec, intr, panel, capture, waveform);
    });

    Dataset ds;
    ds.candidates = static_cast<long long>(tasks.size());
    for (auto& r : results) {
        if (r.outcome == Outcome::Row)
            ds.rows.push_back(r.row);
        else if (r.outcome == Outcome::OutOfView)
            ++ds.rejected_fov;
        else
            ++ds.vision_failures;
    }
    return ds;
}

}  // namespace

int GridSpec::count() const {
    if (!(extent_m >= 0.0) || !(spacing_m > 0.0) || !std::isfinite(extent_m) || !std::isfinite(spacing_m))
        throw ConfigError("grid: extent_m must be >= 0 and spacing_m > 0");
    const double ratio = extent_m / spacing_m;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("grid: extent_m / spacing_m must be an integer");
    return static_cast<int>(n) + 1;
}

double GridSpec::coordinate(int index) const {
    return (index - (count() - 1) / 2.0) * spacing_m;
}

void SweepSpec::validate() const {
    grid.count();
    if (!(angle_step_deg > 0.0) || !std::isfinite(angle_step_deg))
        throw ConfigError("sweep: angle_step_deg must be positive");
    const double n = 360.0 / angle_step_deg;
    if (std::abs(n - std::round(n)) > 1e-9) throw ConfigError("sweep: 360 must be divisible by angle_step_deg");
    for (double h : heights_m)
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("sweep: heights must be positive");
}

int SweepSpec::steps() const { return static_cast<int>(std::round(360.0 / angle_step_deg)); }

Dataset generate_sweep(const SweepSpec& spec, const geom::CameraIntrinsics& intr, const geom::LedPanel& panel) {
    spec.validate();
    const int n = spec.grid.count();
    const int steps = spec.steps();
    Dataset ds;
    for (double h : spec.heights_m) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const geom::Vec3 position{spec.grid.coordinate(i), spec.grid.coordinate(j), h};
                int sample = 0;
                for (int a = 0; a < steps; ++a) {
                    for (int b = 0; b < steps; ++b) {
                        for (int c = 0; c < steps; ++c) {
                            ++ds.candidates;
                            const geom::Pose pose{position,
                                                  geom::Attitude(a * spec.angle_step_deg, b * spec.angle_step_deg,
                                                                 c * spec.angle_step_deg)};
                            geom::CornerSet corners;
                            try {
                                corners = geom::project_panel_corners(intr, pose, panel);
                            } catch (const Error&) {
                                ++ds.rejected_fov;
                                continue;
                            }
                            if (!geom::in_fov(corners, intr)) {
                                ++ds.rejected_fov;
                                continue;
                            }
                            DatasetRow row;
                            row.features = vision::features(corners);
                            row.target = geom::canonical_position(pose);
                            row.attitude = pose.attitude;
                            row.grid_i = i;
                            row.grid_j = j;
                            row.height_m = h;
                            row.source = SourceTag::CleanSim;
                            row.sample = sample++;
                            ds.rows.push_back(row);
                        }
                    }
                }
            }
        }
    }
    return ds;
}

geom::Attitude draw_capture_attitude(const CaptureSpec& spec, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double yaw = (2.0 * unit(rng) - 1.0) * spec.yaw_spread_deg;
    const double axis = 360.0 * unit(rng);
    const double tilt = spec.tilt_max_deg * unit(rng);
    return geom::matrix_to_attitude(geom::rot_z(yaw) * tilt_about(axis, tilt));
}

RenderedCapture render_capture(const geom::CameraIntrinsics& intr, const geom::Pose& pose,
                               const geom::LedPanel& panel, const std::optional<render::Waveform>& waveform,
                               double phase_us, const render::NoiseSpec& noise, std::uint64_t noise_seed) {
    RenderedCapture rc;
    rc.pose = pose;
    rc.scene.quad = geom::project_panel_corners(intr, pose, panel);
    rc.scene.brightness = render::base_brightness(pose, panel, intr);
    rc.scene.waveform = waveform;
    rc.scene.phase_us = phase_us;
    rc.frame = render::rasterize_quad(rc.scene.quad, intr.width_px, intr.height_px, render::frame_meta(intr),
                                      rc.scene.brightness);
    if (waveform) rc.frame = render::apply_rolling_shutter(rc.frame, rc.scene.quad, *waveform, phase_us);
    if (noise.corner_jitter_px > 0.0 || noise.pixel_sigma > 0.0)
        rc.frame = render::add_capture_noise(rc.frame, rc.scene, noise, noise_seed);
    return rc;
}

Dataset generate_capture_set(const SweepSpec& spec, const geom::CameraIntrinsics& intr,
                             const geom::LedPanel& panel, const CaptureSpec& capture) {
    spec.validate();
    if (capture.per_location < 1) throw ConfigError("capture.per_location must be >= 1");
    const int n = spec.grid.count();
    std::vector<CaptureTask> tasks;
    for (double h : spec.heights_m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int s = 0; s < capture.per_location; ++s) tasks.push_back({h, i, j, s});
    return run_capture_tasks(tasks, spec, intr, panel, capture);
}

Dataset rerender_captures(const Dataset& rows, const SweepSpec& spec, const geom::CameraIntrinsics& intr,
                          const geom::LedPanel& panel, const CaptureSpec& capture) {
    spec.validate();
    std::vector<CaptureTask> tasks;
    tasks.reserve(rows.rows.size());
    for (const auto& r : rows.rows) tasks.push_back({r.height_m, r.grid_i, r.grid_j, r.sample});
    return run_capture_tasks(tasks, spec, intr, panel, capture);
}

Split split(const Dataset& ds, int test_per_location, std::uint64_t seed) {
    if (test_per_location < 0) throw ConfigError("test_per_location must be >= 0");
    std::map<LocationKey, std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < ds.rows.size(); ++k) {
        const auto& r = ds.rows[k];
        groups[{r.height_m, r.grid_i, r.grid_j}].push_back(k);
    }
    std::vector<bool> is_test(ds.rows.size(), false);
    for (auto& [key, members] : groups) {
        if (static_cast<int>(members.size()) < test_per_location)
            throw InsufficientRows("location (" + std::to_string(key.grid_i) + ", " + std::to_string(key.grid_j) +
                                   ") at " + std::to_string(key.height_m) + " m has " +
                                   std::to_string(members.size()) + " rows, " +
                                   std::to_string(test_per_location) + " needed for test");
        Rng rng(derive_seed(seed, {kSplitTag, height_bits(key.height_m), static_cast<std::uint64_t>(key.grid_i),
                                   static_cast<std::uint64_t>(key.grid_j)}));
        // Partial Fisher-Yates: the first test_per_location slots are the draw.
        for (int t = 0; t < test_per_location; ++t) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(t), members.size() - 1);
            std::swap(members[static_cast<std::size_t>(t)], members[pick(rng)]);
            is_test[members[static_cast<std::size_t>(t)]] = true;
        }
    }
    Split out;
    for (std::size_t k = 0; k < ds.rows.size(); ++k) (is_test[k] ? out.test : out.train).rows.push_back(ds.rows[k]);
    return out;
}

Dataset drop_sparse_locations(const Dataset& ds, int min_rows) {
    std::map<LocationKey, int> counts;
    for (const auto& r : ds.rows) ++counts[{r.height_m, r.grid_i, r.grid_j}];
    Dataset out;
    out.candidates = ds.candidates;
    out.rejected_fov = ds.rejected_fov;
    out.vision_failures = ds.vision_failures;
    for (const auto& r : ds.rows)
        if (counts[{r.height_m, r.grid_i, r.grid_j}] >= min_rows) out.rows.push_back(r);
    return out;
}

}  // namespace vlp::harness
