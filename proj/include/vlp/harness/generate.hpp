#pragma once

#include <cstdint>
#include <vector>

#include "vlp/codec.hpp"
#include "vlp/geometry.hpp"
#include "vlp/harness/dataset.hpp"
#include "vlp/render.hpp"
#include "vlp/vision.hpp"

namespace vlp::harness {

struct GridSpec {
    double extent_m = 1.2;
    double spacing_m = 0.2;

    // Throws ConfigError unless extent/spacing is an integer.
    int count() const;
    double coordinate(int index) const;  // centred on 0
};

struct SweepSpec {
    std::vector<double> heights_m{1.3, 1.66};
    double angle_step_deg = 45.0;
    GridSpec grid;
    std::uint64_t seed = 0;

    void validate() const;
    int steps() const;
};

// Every (height, grid point, roll, pitch, yaw) on the angle lattice; kept when
// all four corners project onto the sensor. Labels come from the ray-cast
// corners, no rendering.
Dataset generate_sweep(const SweepSpec& spec, const geom::CameraIntrinsics& intr, const geom::LedPanel& panel);

struct CaptureSpec {
    int per_location = 10;
    render::NoiseSpec noise{1.0, 0.02 * 255.0};
    double yaw_spread_deg = 1.5;  // yaw uniform in [-spread, spread]
    double tilt_max_deg = 0.5;    // tilt magnitude uniform in [0, max], axis uniform
    int max_attempts = 25;        // redraws per sample when the panel leaves the FoV
    std::uint8_t led_id = 0x5A;
    double bit_rate_hz = codec::kDefaultBitRateHz;
    bool modulated = true;
    vision::PipelineParams vision;
    int threads = 1;
};

// Random attitude for one capture sample: yaw about the boresight, then a tilt.
geom::Attitude draw_capture_attitude(const CaptureSpec& spec, Rng& rng);

// Rendered, striped, noisy frames pushed through the vision pipeline. Pose and
// phase draws do not depend on the noise settings, so the same seed with zero
// noise re-renders the same captures cleanly.
Dataset generate_capture_set(const SweepSpec& spec, const geom::CameraIntrinsics& intr,
                             const geom::LedPanel& panel, const CaptureSpec& capture);

struct RenderedCapture {
    geom::Pose pose;
    render::Frame frame;
    render::CaptureScene scene;
};

RenderedCapture render_capture(const geom::CameraIntrinsics& intr, const geom::Pose& pose,
                               const geom::LedPanel& panel, const std::optional<render::Waveform>& waveform,
                               double phase_us, const render::NoiseSpec& noise, std::uint64_t noise_seed);

// Re-renders the captures behind `rows` (matched by height, grid point and
// sample) with the given capture settings; rows lost to the FoV or vision
// stages are counted and omitted.
Dataset rerender_captures(const Dataset& rows, const SweepSpec& spec, const geom::CameraIntrinsics& intr,
                          const geom::LedPanel& panel, const CaptureSpec& capture);

// Per (height, grid point), test_per_location rows go to the test set.
struct Split {
    Dataset train;
    Dataset test;
};
Split split(const Dataset& ds, int test_per_location, std::uint64_t seed);

// Drops locations with fewer than min_rows rows.
Dataset drop_sparse_locations(const Dataset& ds, int min_rows);

}  // namespace vlp::harness
