#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "vlp/photometry.hpp"

namespace vlp::geom {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
    double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

    static Mat3 identity() { return Mat3{}; }
    Mat3 transpose() const;
    double det() const;

    friend Mat3 operator*(const Mat3& a, const Mat3& b);
    friend Vec3 operator*(const Mat3& a, const Vec3& v);
};

Mat3 rot_x(double deg);
Mat3 rot_y(double deg);
Mat3 rot_z(double deg);

// Roll/pitch/yaw in degrees, normalized to [0, 360).
class Attitude {
public:
    Attitude() = default;
    Attitude(double roll_deg, double pitch_deg, double yaw_deg);

    double roll() const { return roll_; }
    double pitch() const { return pitch_; }
    double yaw() const { return yaw_; }

    friend bool operator==(const Attitude&, const Attitude&) = default;

private:
    double roll_ = 0.0;
    double pitch_ = 0.0;
    double yaw_ = 0.0;
};

double normalize_degrees(double deg);

// Receiver pose in the LED coordinate system: origin at the panel centre,
// panel in z = 0, +z pointing from the panel toward the floor.
struct Pose {
    Vec3 position;
    Attitude attitude;
};

struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct CameraIntrinsics {
    int width_px = 1728;
    int height_px = 2304;
    double fx_px = 1600.0;
    double fy_px = 1600.0;
    double cx_px = 864.0;
    double cy_px = 1152.0;
    double exposure_us = 68.0;
    double iso_gain = 100.0;
    double row_readout_us = 5.0;

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

struct LedPanel {
    double side_m = 0.595;
    double flux_lm = 3600.0;
    double cct_k = 4000.0;  // metadata only
    render::PolarCurve curve = render::lambertian_default(3600.0);

    void validate() const;
};

// Exactly four image points. Produced in canonical order by order_corners().
struct CornerSet {
    std::array<PixelPoint, 4> points{};
};

// R = Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 attitude_to_matrix(const Attitude& att);

// Inverse of attitude_to_matrix for non-degenerate pitch.
Attitude matrix_to_attitude(const Mat3& r);

// Camera-to-LCS rotation. At identity attitude the camera boresight (+z_cam)
// points along -z_LCS, i.e. straight up at the panel.
Mat3 camera_to_lcs(const Attitude& att);

// Heading of the camera +x axis in the LCS xy plane, degrees in [0, 360).
double camera_heading_deg(const Attitude& att);

PixelPoint project_point(const CameraIntrinsics& intr, const Pose& pose, const Vec3& p);

// Ray cast from a pixel through the camera onto the z = 0 plane.
std::optional<Vec3> backproject_to_panel_plane(const CameraIntrinsics& intr, const Pose& pose,
                                               const PixelPoint& px);

std::array<Vec3, 4> panel_corners_lcs(const LedPanel& panel);

CornerSet project_panel_corners(const CameraIntrinsics& intr, const Pose& pose, const LedPanel& panel);

bool in_fov(const CornerSet& c, const CameraIntrinsics& intr);

// Receiver position expressed in the panel frame turned by the multiple of
// 90 degrees nearest to the camera heading. Equal to the LCS position while the
// heading is within [-45, 45) degrees of the panel +x edge. Poses related by
// the panel's quarter-turn symmetry produce identical images and get the same
// value here.
Vec3 canonical_position(const Pose& pose);

}  // namespace vlp::geom
