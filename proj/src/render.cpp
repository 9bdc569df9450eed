#include "vlp/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vlp/errors.hpp"
#include "vlp/rng.hpp"
#include "vlp/vision.hpp"

namespace vlp::render {

double brightness_calibration() {
    const geom::LedPanel panel;
    const geom::CameraIntrinsics intr;
    const double i0 = panel.curve.intensity_at(0.0);
    return kSaturationHeadroom * kCalibrationDistanceM * kCalibrationDistanceM /
           (i0 * intr.iso_gain * intr.exposure_us);
}

double base_brightness(const geom::Pose& pose, const geom::LedPanel& panel, const geom::CameraIntrinsics& intr) {
    const double d = pose.position.norm();
    if (!(d > 0.0) || !(pose.position.z > 0.0)) return 0.0;
    const double theta = std::acos(std::clamp(pose.position.z / d, -1.0, 1.0)) * 180.0 / std::numbers::pi;
    const double value =
        brightness_calibration() * panel.curve.intensity_at(theta) / (d * d) * intr.iso_gain * intr.exposure_us;
    return std::clamp(value, 0.0, 1.0);
}

long long QuadSpans::pixel_count() const {
    long long n = 0;
    for (const auto& [b, e] : spans) n += e - b;
    return n;
}

QuadSpans quad_spans(const geom::CornerSet& quad, int width, int height) {
    const auto& p = quad.points;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& pt : p) {
        ymin = std::min(ymin, pt.v);
        ymax = std::max(ymax, pt.v);
    }
    QuadSpans out;
    if (!std::isfinite(ymin) || !std::isfinite(ymax)) return out;
    // Row r is sampled at its centre r + 0.5; left/top edges inclusive.
    const int r0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    const int r1 = std::min(height, static_cast<int>(std::ceil(ymax - 0.5)));
    bool started = false;
    for (int r = r0; r < r1; ++r) {
        const double y = r + 0.5;
        double xl = std::numeric_limits<double>::infinity(), xr = -xl;
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& a = p[i];
            const auto& b = p[(i + 1) % 4];
            if (a.v == b.v) continue;
            const bool crosses = (a.v <= y && y < b.v) || (b.v <= y && y < a.v);
            if (!crosses) continue;
            const double x = a.u + (y - a.v) * (b.u - a.u) / (b.v - a.v);
            xl = std::min(xl, x);
            xr = std::max(xr, x);
        }
        int c0 = 0, c1 = 0;
        if (xl <= xr) {
            c0 = std::max(0, static_cast<int>(std::ceil(xl - 0.5)));
            c1 = std::min(width, static_cast<int>(std::ceil(xr - 0.5)));
        }
        if (c1 <= c0) {
            if (started) out.spans.emplace_back(0, 0);
            continue;
        }
        if (!started) {
            out.first_row = r;
            started = true;
        }
        out.spans.emplace_back(c0, c1);
    }
    while (!out.spans.empty() && out.spans.back().first == out.spans.back().second) out.spans.pop_back();
    return out;
}

double quad_area(const geom::CornerSet& quad) {
    double twice = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = quad.points[i];
        const auto& b = quad.points[(i + 1) % 4];
        twice += a.u * b.v - b.u * a.v;
    }
    return std::abs(twice) / 2.0;
}

FrameMeta frame_meta(const geom::CameraIntrinsics& intr) {
    return FrameMeta{intr.exposure_us, intr.row_readout_us, intr.iso_gain};
}

Frame rasterize_quad(const geom::CornerSet& quad, int width, int height, const FrameMeta& meta, double brightness) {
    Frame frame(width, height, meta);
    const auto value = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(brightness, 0.0, 1.0)));
    if (value == 0) return frame;
    const QuadSpans spans = quad_spans(quad, width, height);
    for (std::size_t i = 0; i < spans.spans.size(); ++i) {
        const auto [c0, c1] = spans.spans[i];
        auto row = frame.row(spans.first_row + static_cast<int>(i));
        std::fill(row.begin() + c0, row.begin() + c1, value);
    }
    return frame;
}

Frame rasterize_panel(const geom::CameraIntrinsics& intr, const geom::Pose& pose, const geom::LedPanel& panel,
                      double brightness) {
    const geom::CornerSet quad = geom::project_panel_corners(intr, pose, panel);
    return rasterize_quad(quad, intr.width_px, intr.height_px, frame_meta(intr), brightness);
}

Waveform::Waveform(std::vector<bool> levels, double level_duration_us, bool repeating, bool invert_on_repeat)
    : levels_(std::move(levels)),
      level_duration_us_(level_duration_us),
      repeating_(repeating),
      invert_on_repeat_(invert_on_repeat) {
    if (levels_.empty()) throw std::invalid_argument("waveform needs at least one level");
    if (!(level_duration_us_ > 0.0) || !std::isfinite(level_duration_us_))
        throw std::invalid_argument("level duration must be positive");
    const std::size_t n = period_levels();
    prefix_on_.resize(n + 1);
    prefix_on_[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) prefix_on_[i + 1] = prefix_on_[i] + (level_at(i) ? level_duration_us_ : 0.0);
}

bool Waveform::level_at(std::size_t index) const {
    const std::size_t n = levels_.size();
    const std::size_t i = index % period_levels();
    const bool base = levels_[i % n];
    return (invert_on_repeat_ && i >= n) ? !base : base;
}

double Waveform::duty_cycle() const { return prefix_on_.back() / period_us(); }

double Waveform::on_time_before(double t_us) const {
    const double period = period_us();
    double cycles = 0.0;
    double rem = t_us;
    if (repeating_) {
        cycles = std::floor(t_us / period);
        rem = t_us - cycles * period;
        if (rem < 0.0) rem = 0.0;
        if (rem > period) rem = period;
    } else {
        rem = std::clamp(t_us, 0.0, period);
    }
    const std::size_t n = period_levels();
    auto idx = static_cast<std::size_t>(rem / level_duration_us_);
    if (idx >= n) idx = n - 1;
    double partial = prefix_on_[idx];
    if (level_at(idx)) partial += std::min(rem - static_cast<double>(idx) * level_duration_us_, level_duration_us_);
    return cycles * prefix_on_.back() + partial;
}

Waveform Waveform::constant_on(double level_duration_us) { return Waveform({true}, level_duration_us); }

Waveform Waveform::square(double frequency_hz) {
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("frequency must be positive");
    return Waveform({true, false}, 1e6 / (2.0 * frequency_hz));
}

double row_exposure_fraction(const Waveform& w, double row_start_us, double exposure_us) {
    if (!(exposure_us > 0.0)) throw std::invalid_argument("exposure must be positive");
    double start = row_start_us;
    if (w.repeating()) {
        // Shift into the first period to keep the subtraction well conditioned.
        const double period = w.period_us();
        start -= std::floor(start / period) * period;
    }
    const double on = w.on_time_before(start + exposure_us) - w.on_time_before(start);
    return std::clamp(on / exposure_us, 0.0, 1.0);
}

namespace {

void shutter_in_place(Frame& frame, const QuadSpans& spans, const Waveform& w, double phase_us) {
    const FrameMeta& meta = frame.meta();
    for (std::size_t i = 0; i < spans.spans.size(); ++i) {
        const int r = spans.first_row + static_cast<int>(i);
        const auto [c0, c1] = spans.spans[i];
        if (c1 <= c0) continue;
        const double frac = row_exposure_fraction(w, r * meta.row_readout_us + phase_us, meta.exposure_us);
        auto row = frame.row(r);
        for (int c = c0; c < c1; ++c) row[c] = static_cast<std::uint8_t>(std::lround(row[c] * frac));
    }
}

// Exact sampler of round(sigma * Z) for Z standard normal (Vose alias table).
class RoundedGaussian {
public:
    explicit RoundedGaussian(double sigma) {
        const int k_max = static_cast<int>(std::ceil(8.0 * sigma)) + 1;
        offset_ = -k_max;
        const std::size_t n = static_cast<std::size_t>(2 * k_max + 1);
        std::vector<double> p(n);
        auto cdf = [sigma](double x) { return 0.5 * std::erfc(-x / (sigma * std::numbers::sqrt2)); };
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double k = offset_ + static_cast<double>(i);
            p[i] = cdf(k + 0.5) - cdf(k - 0.5);
            total += p[i];
        }
        prob_.assign(n, 1.0);
        alias_.resize(n);
        for (std::size_t i = 0; i < n; ++i) alias_[i] = static_cast<std::uint32_t>(i);
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = p[i] / total * static_cast<double>(n);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            small.pop_back();
            const std::size_t l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = static_cast<std::uint32_t>(l);
            scaled[l] -= 1.0 - scaled[s];
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
    }

    int operator()(std::uint64_t r) const {
        const std::uint64_t n = prob_.size();
        const std::size_t idx = static_cast<std::size_t>(((r >> 32) * n) >> 32);
        const double u = static_cast<double>(r & 0xffffffffULL) * 0x1p-32;
        return offset_ + static_cast<int>(u < prob_[idx] ? idx : alias_[idx]);
    }

private:
    int offset_ = 0;
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

}  // namespace

Frame apply_rolling_shutter(const Frame& frame, const geom::CornerSet& quad, const Waveform& w, double phase_us) {
    Frame out = frame;
    shutter_in_place(out, quad_spans(quad, frame.width(), frame.height()), w, phase_us);
    return out;
}

Frame add_capture_noise(const Frame& frame, const CaptureScene& scene, const NoiseSpec& noise, std::uint64_t seed) {
    if (!(noise.corner_jitter_px >= 0.0) || !(noise.pixel_sigma >= 0.0))
        throw std::invalid_argument("noise parameters must be non-negative");
    Frame out;
    if (noise.corner_jitter_px > 0.0) {
        Rng rng(derive_seed(seed, {1}));
        std::normal_distribution<double> jitter(0.0, noise.corner_jitter_px);
        std::array<geom::PixelPoint, 4> pts = scene.quad.points;
        for (auto& p : pts) {
            p.u += jitter(rng);
            p.v += jitter(rng);
        }
        geom::CornerSet jittered{pts};
        try {
            jittered = vision::order_corners(pts);
        } catch (const DegenerateQuad&) {
        }
        out = rasterize_quad(jittered, frame.width(), frame.height(), frame.meta(), scene.brightness);
        if (scene.waveform)
            shutter_in_place(out, quad_spans(jittered, out.width(), out.height()), *scene.waveform, scene.phase_us);
    } else {
        out = frame;
    }
    if (noise.pixel_sigma > 0.0) {
        // Pixels are integers, so round(v + sigma Z) = v + round(sigma Z).
        const RoundedGaussian sample(noise.pixel_sigma);
        Rng rng(derive_seed(seed, {2}));
        for (auto& px : out.pixels()) px = static_cast<std::uint8_t>(std::clamp(px + sample(rng()), 0, 255));
    }
    return out;
}

}  // namespace vlp::render
