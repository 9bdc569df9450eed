#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vlp/frame.hpp"
#include "vlp/geometry.hpp"

namespace vlp::vision {

class BitMask {
public:
    BitMask() = default;
    BitMask(int width, int height) : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool at(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
    void set(int row, int col, bool value = true) { bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0; }
    const std::vector<std::uint8_t>& data() const { return bits_; }
    std::vector<std::uint8_t>& data() { return bits_; }
    long long count() const;

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct BoundingBox {
    int row0 = 0, col0 = 0, row1 = -1, col1 = -1;  // inclusive
    bool empty() const { return row1 < row0 || col1 < col0; }
};

BoundingBox bounding_box(const BitMask& mask);

using FeatureVector = std::array<double, 8>;

BitMask binarize(const render::Frame& frame, int threshold = 128);

// Square structuring element of half-width radius.
BitMask dilate(const BitMask& mask, int radius);
// Pixels outside the image count as set, so a blob touching the border is not eaten.
BitMask erode(const BitMask& mask, int radius);
BitMask close(const BitMask& mask, int radius);

// 8-connected; ties go to the component whose topmost-leftmost pixel comes first.
BitMask largest_component(const BitMask& mask);

struct CornerParams {
    int count = 4;
    int window = 5;
    double min_distance_px = 20.0;
    double quality = 0.1;  // fraction of the best response a candidate must reach
    double smoothing_sigma = 1.0;
};

// Shi-Tomasi minimum-eigenvalue response on the smoothed mask, greedy
// suppression, windowed centroid then gradient-orthogonality refinement. Points use pixel-centre = index + 0.5.
std::vector<geom::PixelPoint> detect_corners(const BitMask& mask, const CornerParams& params = {});

// Pixels whose centres lie in the convex hull of the set pixel centres.
BitMask fill_convex_hull(const BitMask& mask);

// Moves each corner to the intersection of lines fitted (with outlier
// trimming) to the mask boundary along its two adjacent sides. Corners whose
// fit is unusable, or would move further than max_shift_px, are kept.
geom::CornerSet refine_corners(const BitMask& blob, const geom::CornerSet& corners, double max_shift_px = 40.0);

// Angular order about the centroid, ascending in [0, 2 pi) from +u.
geom::CornerSet order_corners(const std::array<geom::PixelPoint, 4>& points);

FeatureVector features(const geom::CornerSet& c);

struct PipelineParams {
    int threshold = 128;
    int close_radius = 11;
    CornerParams corners;
    double min_area_ratio = 0.8;
    // Suppression distance grows to this fraction of sqrt(blob area), so the
    // two vertices of a corner clipped by a dark stripe count as one.
    double min_distance_area_ratio = 0.2;
    bool fill_hull = true;
    bool refine_edges = true;
};

// ceil(longest dark run in rows / 2) + 1 for a differential Manchester stream.
int default_close_radius(double row_readout_us, double bit_rate_hz);

// Convexity and area >= min_area_ratio * component pixels.
bool quad_is_sane(const geom::CornerSet& c, long long component_pixels, double min_area_ratio);

// binarize -> close -> largest component -> hull fill -> corners -> order ->
// edge refinement -> sanity check.
// Throws VisionFailure (or the specific stage error) when no panel is found.
geom::CornerSet extract_corners(const render::Frame& frame, const PipelineParams& params = {});

}  // namespace vlp::vision
