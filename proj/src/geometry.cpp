#include "vlp/geometry.hpp"

#include <numbers>
#include <stdexcept>
#include <string>

#include "vlp/errors.hpp"
#include "vlp/vision.hpp"

namespace vlp::geom {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

// Rotation by 180 degrees about x: camera +z onto LCS -z.
const Mat3 kBoresightFlip{{1, 0, 0, 0, -1, 0, 0, 0, -1}};

}  // namespace

Mat3 Mat3::transpose() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
}

double Mat3::det() const {
    const Mat3& a = *this;
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    return out;
}

Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z, a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

Mat3 rot_x(double deg) {
    const double c = std::cos(radians(deg)), s = std::sin(radians(deg));
    return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 rot_y(double deg) {
    const double c = std::cos(radians(deg)), s = std::sin(radians(deg));
    return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 rot_z(double deg) {
    const double c = std::cos(radians(deg)), s = std::sin(radians(deg));
    return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

double normalize_degrees(double deg) {
    double out = std::fmod(deg, 360.0);
    if (out < 0.0) out += 360.0;
    if (out >= 360.0) out = 0.0;  // fmod of tiny negatives
    return out;
}

Attitude::Attitude(double roll_deg, double pitch_deg, double yaw_deg) {
    if (!std::isfinite(roll_deg) || !std::isfinite(pitch_deg) || !std::isfinite(yaw_deg))
        throw std::invalid_argument("attitude angles must be finite");
    roll_ = normalize_degrees(roll_deg);
    pitch_ = normalize_degrees(pitch_deg);
    yaw_ = normalize_degrees(yaw_deg);
}

void CameraIntrinsics::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("camera intrinsics: " + what); };
    if (width_px <= 0 || height_px <= 0) fail("width and height must be positive");
    if (!(fx_px > 0.0) || !(fy_px > 0.0)) fail("focal lengths must be positive");
    if (!(cx_px >= 0.0 && cx_px < width_px)) fail("cx outside the sensor");
    if (!(cy_px >= 0.0 && cy_px < height_px)) fail("cy outside the sensor");
    if (!(exposure_us > 0.0)) fail("exposure must be positive");
    if (!(row_readout_us > 0.0)) fail("row readout must be positive");
    if (!(iso_gain > 0.0)) fail("iso gain must be positive");
}

void LedPanel::validate() const {
    if (!(side_m > 0.0)) throw std::invalid_argument("panel side must be positive");
    if (!(flux_lm > 0.0)) throw std::invalid_argument("panel flux must be positive");
    if (curve.samples().size() < 2) throw std::invalid_argument("panel polar curve is empty");
}

Mat3 attitude_to_matrix(const Attitude& att) {
    return rot_z(att.yaw()) * rot_y(att.pitch()) * rot_x(att.roll());
}

Attitude matrix_to_attitude(const Mat3& r) {
    const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    const double k = 180.0 / std::numbers::pi;
    return Attitude(roll * k, pitch * k, yaw * k);
}

Mat3 camera_to_lcs(const Attitude& att) { return attitude_to_matrix(att) * kBoresightFlip; }

double camera_heading_deg(const Attitude& att) {
    const Mat3 r = attitude_to_matrix(att);
    return normalize_degrees(std::atan2(r(1, 0), r(0, 0)) * 180.0 / std::numbers::pi);
}

PixelPoint project_point(const CameraIntrinsics& intr, const Pose& pose, const Vec3& p) {
    const Vec3 cam = camera_to_lcs(pose.attitude).transpose() * (p - pose.position);
    if (!(cam.z > 0.0)) throw BehindCamera("point is behind the camera");
    return {intr.fx_px * (cam.x / cam.z) + intr.cx_px, intr.fy_px * (cam.y / cam.z) + intr.cy_px};
}

std::optional<Vec3> backproject_to_panel_plane(const CameraIntrinsics& intr, const Pose& pose,
                                               const PixelPoint& px) {
    const Vec3 ray_cam{(px.u - intr.cx_px) / intr.fx_px, (px.v - intr.cy_px) / intr.fy_px, 1.0};
    const Vec3 ray = camera_to_lcs(pose.attitude) * ray_cam;
    if (std::abs(ray.z) < 1e-15) return std::nullopt;
    const double t = -pose.position.z / ray.z;
    if (!(t > 0.0)) return std::nullopt;
    return pose.position + t * ray;
}

std::array<Vec3, 4> panel_corners_lcs(const LedPanel& panel) {
    const double h = panel.side_m / 2.0;
    return {Vec3{h, h, 0.0}, Vec3{-h, h, 0.0}, Vec3{-h, -h, 0.0}, Vec3{h, -h, 0.0}};
}

CornerSet project_panel_corners(const CameraIntrinsics& intr, const Pose& pose, const LedPanel& panel) {
    std::array<PixelPoint, 4> pts;
    const auto corners = panel_corners_lcs(panel);
    for (std::size_t i = 0; i < 4; ++i) pts[i] = project_point(intr, pose, corners[i]);
    return vision::order_corners(pts);
}

bool in_fov(const CornerSet& c, const CameraIntrinsics& intr) {
    for (const auto& p : c.points) {
        if (!(p.u >= 0.0 && p.u < intr.width_px && p.v >= 0.0 && p.v < intr.height_px)) return false;
    }
    return true;
}

Vec3 canonical_position(const Pose& pose) {
    // Round so that headings on a quadrant boundary fold the same way for every
    // member of a symmetry class.
    const double heading = std::round(camera_heading_deg(pose.attitude) * 1e6) / 1e6;
    const int quadrant = static_cast<int>(std::floor((heading + 45.0) / 90.0)) % 4;
    const Vec3& p = pose.position;
    switch (quadrant) {
        case 1: return {p.y, -p.x, p.z};
        case 2: return {-p.x, -p.y, p.z};
        case 3: return {-p.y, p.x, p.z};
        default: return p;
    }
}

}  // namespace vlp::geom
