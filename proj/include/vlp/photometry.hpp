#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vlp::render {

struct PolarSample {
    double angle_deg = 0.0;
    double intensity_cd = 0.0;
};

// Luminous intensity versus angle from the panel normal, 0..90 degrees.
class PolarCurve {
public:
    PolarCurve() = default;
    // Throws std::invalid_argument unless angles start at 0, increase strictly,
    // stay within [0, 90] and intensities are non-negative (at least 2 samples).
    explicit PolarCurve(std::vector<PolarSample> samples);

    const std::vector<PolarSample>& samples() const { return samples_; }

    // Linear interpolation; zero beyond the last sample.
    double intensity_at(double angle_deg) const;

private:
    std::vector<PolarSample> samples_;
};

// LM-63 text. Only the first horizontal plane is read and vertical angles are
// restricted to [0, 90]. Throws MalformedIes.
PolarCurve parse_ies(std::string_view text);

// Minimal LM-63-2002 document with TILT=NONE and a single horizontal angle.
std::string write_ies(const PolarCurve& curve, double lumens);

// (flux / pi) * cos(theta), sampled every 5 degrees.
PolarCurve lambertian_default(double flux_lm);

// Trapezoid-rule integral of I(theta) * 2 pi sin(theta) over the samples.
double hemisphere_flux(const PolarCurve& curve);

}  // namespace vlp::render
