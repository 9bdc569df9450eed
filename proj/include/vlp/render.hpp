#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "vlp/frame.hpp"
#include "vlp/geometry.hpp"

namespace vlp::render {

// Gain that brings the default panel to 3x saturation at 1.3 m nadir with the
// default exposure and ISO.
double brightness_calibration();
inline constexpr double kSaturationHeadroom = 3.0;
inline constexpr double kCalibrationDistanceM = 1.3;

// clamp(k * I(theta_emit) / d^2 * iso * exposure, 0, 1).
double base_brightness(const geom::Pose& pose, const geom::LedPanel& panel,
                       const geom::CameraIntrinsics& intr);

// Pixel-centre coverage of a convex quad, one [begin, end) column span per row,
// clipped to the image.
struct QuadSpans {
    int first_row = 0;
    std::vector<std::pair<int, int>> spans;

    bool empty() const { return spans.empty(); }
    int last_row() const { return first_row + static_cast<int>(spans.size()) - 1; }
    long long pixel_count() const;
};

QuadSpans quad_spans(const geom::CornerSet& quad, int width, int height);

// Shoelace area of the quad in its stored order.
double quad_area(const geom::CornerSet& quad);

Frame rasterize_quad(const geom::CornerSet& quad, int width, int height, const FrameMeta& meta,
                     double brightness);

Frame rasterize_panel(const geom::CameraIntrinsics& intr, const geom::Pose& pose,
                      const geom::LedPanel& panel, double brightness);

FrameMeta frame_meta(const geom::CameraIntrinsics& intr);

// Binary on/off levels of one code word. When invert_on_repeat is set, every
// second repetition is the complement, so the period is twice the word length.
class Waveform {
public:
    Waveform(std::vector<bool> levels, double level_duration_us, bool repeating = true,
             bool invert_on_repeat = false);

    const std::vector<bool>& levels() const { return levels_; }
    double level_duration_us() const { return level_duration_us_; }
    bool repeating() const { return repeating_; }
    bool invert_on_repeat() const { return invert_on_repeat_; }

    std::size_t period_levels() const { return levels_.size() * (invert_on_repeat_ ? 2 : 1); }
    double period_us() const { return static_cast<double>(period_levels()) * level_duration_us_; }
    bool level_at(std::size_t index) const;
    double duty_cycle() const;

    // Time spent on within [0, t); periodic extension for repeating waveforms,
    // off outside one period otherwise.
    double on_time_before(double t_us) const;

    static Waveform constant_on(double level_duration_us = 50.0);
    static Waveform square(double frequency_hz);

private:
    std::vector<bool> levels_;
    double level_duration_us_;
    bool repeating_;
    bool invert_on_repeat_;
    std::vector<double> prefix_on_;  // on-time at the start of each level
};

double row_exposure_fraction(const Waveform& w, double row_start_us, double exposure_us);

// Panel pixels of row r are scaled by the fraction of [r*readout + phase,
// r*readout + phase + exposure] during which the waveform is on.
Frame apply_rolling_shutter(const Frame& frame, const geom::CornerSet& quad, const Waveform& w,
                            double phase_us = 0.0);

// What was drawn, so noise can re-rasterize a jittered quad.
struct CaptureScene {
    geom::CornerSet quad;
    double brightness = 1.0;
    std::optional<Waveform> waveform;
    double phase_us = 0.0;
};

struct NoiseSpec {
    double corner_jitter_px = 0.0;
    double pixel_sigma = 0.0;  // gray levels
};

Frame add_capture_noise(const Frame& frame, const CaptureScene& scene, const NoiseSpec& noise,
                        std::uint64_t seed);

}  // namespace vlp::render
