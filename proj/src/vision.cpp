#include "vlp/vision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <numeric>
#include <stdexcept>
#include <string>

#include "vlp/errors.hpp"

namespace vlp::vision {

using geom::PixelPoint;

long long BitMask::count() const {
    return std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

BoundingBox bounding_box(const BitMask& mask) {
    BoundingBox box{mask.height(), mask.width(), -1, -1};
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            box.row0 = std::min(box.row0, r);
            box.row1 = std::max(box.row1, r);
            box.col0 = std::min(box.col0, c);
            box.col1 = std::max(box.col1, c);
        }
    }
    if (box.row1 < 0) return BoundingBox{};
    return box;
}

BitMask binarize(const render::Frame& frame, int threshold) {
    BitMask mask(frame.width(), frame.height());
    const auto& px = frame.pixels();
    auto& bits = mask.data();
    for (std::size_t i = 0; i < px.size(); ++i) bits[i] = px[i] >= threshold ? 1 : 0;
    return mask;
}

namespace {

// Running-count square dilation; pixels outside the image count as unset.
void dilate_rows(const std::uint8_t* in, std::uint8_t* out, int w, int h, int radius) {
    for (int r = 0; r < h; ++r) {
        const std::uint8_t* src = in + static_cast<std::size_t>(r) * w;
        std::uint8_t* dst = out + static_cast<std::size_t>(r) * w;
        int count = 0;
        for (int c = 0; c < std::min(w, radius); ++c) count += src[c];
        for (int c = 0; c < w; ++c) {
            if (c + radius < w) count += src[c + radius];
            if (c - radius - 1 >= 0) count -= src[c - radius - 1];
            dst[c] = count > 0 ? 1 : 0;
        }
    }
}

void dilate_cols(const std::uint8_t* in, std::uint8_t* out, int w, int h, int radius) {
    std::vector<int> count(static_cast<std::size_t>(w), 0);
    for (int r = 0; r < std::min(h, radius); ++r) {
        const std::uint8_t* src = in + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < w; ++c) count[static_cast<std::size_t>(c)] += src[c];
    }
    for (int r = 0; r < h; ++r) {
        if (r + radius < h) {
            const std::uint8_t* add = in + static_cast<std::size_t>(r + radius) * w;
            for (int c = 0; c < w; ++c) count[static_cast<std::size_t>(c)] += add[c];
        }
        if (r - radius - 1 >= 0) {
            const std::uint8_t* sub = in + static_cast<std::size_t>(r - radius - 1) * w;
            for (int c = 0; c < w; ++c) count[static_cast<std::size_t>(c)] -= sub[c];
        }
        std::uint8_t* dst = out + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < w; ++c) dst[c] = count[static_cast<std::size_t>(c)] > 0 ? 1 : 0;
    }
}

BitMask complement(const BitMask& mask) {
    BitMask out = mask;
    for (auto& b : out.data()) b ^= 1;
    return out;
}

BitMask dilate_impl(const BitMask& mask, int radius) {
    if (radius < 0) throw std::invalid_argument("morphology radius must be non-negative");
    if (radius == 0) return mask;
    BitMask tmp(mask.width(), mask.height()), out(mask.width(), mask.height());
    dilate_rows(mask.data().data(), tmp.data().data(), mask.width(), mask.height(), radius);
    dilate_cols(tmp.data().data(), out.data().data(), mask.width(), mask.height(), radius);
    return out;
}

}  // namespace

BitMask dilate(const BitMask& mask, int radius) { return dilate_impl(mask, radius); }

BitMask erode(const BitMask& mask, int radius) {
    if (radius == 0) return mask;
    return complement(dilate_impl(complement(mask), radius));
}

BitMask close(const BitMask& mask, int radius) { return erode(dilate(mask, radius), radius); }

BitMask largest_component(const BitMask& mask) {
    const int w = mask.width(), h = mask.height();
    struct Run {
        int row, c0, c1;  // [c0, c1)
    };
    std::vector<Run> runs;
    std::vector<std::size_t> row_start(static_cast<std::size_t>(h) + 1, 0);
    for (int r = 0; r < h; ++r) {
        row_start[static_cast<std::size_t>(r)] = runs.size();
        const std::uint8_t* row = mask.data().data() + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < w;) {
            if (!row[c]) {
                ++c;
                continue;
            }
            const int c0 = c;
            while (c < w && row[c]) ++c;
            runs.push_back({r, c0, c});
        }
    }
    row_start[static_cast<std::size_t>(h)] = runs.size();
    if (runs.empty()) throw EmptyMask("mask has no set pixels");

    std::vector<std::size_t> parent(runs.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int r = 1; r < h; ++r) {
        std::size_t j = row_start[static_cast<std::size_t>(r) - 1];
        const std::size_t jend = row_start[static_cast<std::size_t>(r)];
        for (std::size_t i = row_start[static_cast<std::size_t>(r)]; i < row_start[static_cast<std::size_t>(r) + 1]; ++i) {
            // 8-connectivity: runs touch when they overlap after widening by one.
            while (j < jend && runs[j].c1 < runs[i].c0) ++j;
            for (std::size_t k = j; k < jend && runs[k].c0 <= runs[i].c1; ++k) {
                const std::size_t a = find(i), b = find(k);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        }
    }
    // Roots are the lowest run index of each component, i.e. its
    // topmost-leftmost pixel, so scanning roots in order gives the tie-break.
    std::vector<long long> size(runs.size(), 0);
    for (std::size_t i = 0; i < runs.size(); ++i) size[find(i)] += runs[i].c1 - runs[i].c0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (size[i] > size[best]) best = i;
    BitMask out(w, h);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (find(i) != best) continue;
        std::uint8_t* row = out.data().data() + static_cast<std::size_t>(runs[i].row) * w;
        std::fill(row + runs[i].c0, row + runs[i].c1, std::uint8_t{1});
    }
    return out;
}

namespace {

// Dense double image used by the corner detector.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    Plane(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * height, 0.0) {}
    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

Plane gaussian_blur(const Plane& in, double sigma) {
    if (!(sigma > 0.0)) return in;
    const int rad = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * rad + 1));
    double sum = 0.0;
    for (int i = -rad; i <= rad; ++i) {
        k[static_cast<std::size_t>(i + rad)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<std::size_t>(i + rad)];
    }
    for (auto& x : k) x /= sum;
    // Zero padding of rad on every side keeps the inner loops branch-free.
    const int pw = in.w + 2 * rad;
    std::vector<double> line(static_cast<std::size_t>(pw), 0.0);
    Plane tmp(in.w, in.h), out(in.w, in.h);
    for (int r = 0; r < in.h; ++r) {
        std::copy_n(&in.v[static_cast<std::size_t>(r) * in.w], in.w, line.begin() + rad);
        for (int c = 0; c < in.w; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * line[static_cast<std::size_t>(c) + i];
            tmp(r, c) = s;
        }
    }
    for (int r = 0; r < in.h; ++r) {
        double* dst = &out.v[static_cast<std::size_t>(r) * in.w];
        for (int i = -rad; i <= rad; ++i) {
            const int rr = r + i;
            if (rr < 0 || rr >= in.h) continue;
            const double kk = k[static_cast<std::size_t>(i + rad)];
            const double* src = &tmp.v[static_cast<std::size_t>(rr) * in.w];
            for (int c = 0; c < in.w; ++c) dst[c] += kk * src[c];
        }
    }
    return out;
}

// Sum over the (2 half + 1)^2 window, zero outside, by running sums.
Plane box_sum(const Plane& in, int half) {
    Plane tmp(in.w, in.h), out(in.w, in.h);
    for (int r = 0; r < in.h; ++r) {
        const double* src = &in.v[static_cast<std::size_t>(r) * in.w];
        double* dst = &tmp.v[static_cast<std::size_t>(r) * in.w];
        double s = 0.0;
        for (int c = 0; c < std::min(in.w, half); ++c) s += src[c];
        for (int c = 0; c < in.w; ++c) {
            if (c + half < in.w) s += src[c + half];
            if (c - half - 1 >= 0) s -= src[c - half - 1];
            dst[c] = s;
        }
    }
    std::vector<double> acc(static_cast<std::size_t>(in.w), 0.0);
    for (int r = 0; r < std::min(in.h, half); ++r)
        for (int c = 0; c < in.w; ++c) acc[static_cast<std::size_t>(c)] += tmp(r, c);
    for (int r = 0; r < in.h; ++r) {
        if (r + half < in.h)
            for (int c = 0; c < in.w; ++c) acc[static_cast<std::size_t>(c)] += tmp(r + half, c);
        if (r - half - 1 >= 0)
            for (int c = 0; c < in.w; ++c) acc[static_cast<std::size_t>(c)] -= tmp(r - half - 1, c);
        std::copy(acc.begin(), acc.end(), out.v.begin() + static_cast<std::ptrdiff_t>(r) * in.w);
    }
    return out;
}

struct Candidate {
    double score;
    int row, col;
};

}  // namespace

std::vector<PixelPoint> detect_corners(const BitMask& mask, const CornerParams& params) {
    if (params.count < 1 || params.window < 1) throw std::invalid_argument("bad corner parameters");
    const BoundingBox box = bounding_box(mask);
    if (box.empty()) throw EmptyMask("no pixels to detect corners on");
    const int half = params.window / 2;
    const int margin = static_cast<int>(std::ceil(3.0 * params.smoothing_sigma)) + half + 3;
    const int r0 = box.row0 - margin, c0 = box.col0 - margin;
    Plane img(box.col1 - box.col0 + 1 + 2 * margin, box.row1 - box.row0 + 1 + 2 * margin);
    for (int r = box.row0; r <= box.row1; ++r)
        for (int c = box.col0; c <= box.col1; ++c) img(r - r0, c - c0) = mask.at(r, c) ? 1.0 : 0.0;

    const Plane smooth = gaussian_blur(img, params.smoothing_sigma);
    Plane ixx(img.w, img.h), ixy(img.w, img.h), iyy(img.w, img.h);
    for (int r = 1; r + 1 < img.h; ++r)
        for (int c = 1; c + 1 < img.w; ++c) {
            const double gx = 0.5 * (smooth(r, c + 1) - smooth(r, c - 1));
            const double gy = 0.5 * (smooth(r + 1, c) - smooth(r - 1, c));
            ixx(r, c) = gx * gx;
            ixy(r, c) = gx * gy;
            iyy(r, c) = gy * gy;
        }
    const Plane a = box_sum(ixx, half), b = box_sum(ixy, half), d = box_sum(iyy, half);
    Plane score(img.w, img.h);
    double best = 0.0;
    for (std::size_t i = 0; i < score.v.size(); ++i) {
        const double mean = 0.5 * (a.v[i] + d.v[i]);
        const double diff = 0.5 * (a.v[i] - d.v[i]);
        score.v[i] = std::max(0.0, mean - std::sqrt(diff * diff + b.v[i] * b.v[i]));
        best = std::max(best, score.v[i]);
    }
    if (!(best > 0.0)) throw TooFewCorners("no corner response");

    std::vector<Candidate> cands;
    for (int r = 1; r + 1 < img.h; ++r)
        for (int c = 1; c + 1 < img.w; ++c) {
            const double s = score(r, c);
            if (s < params.quality * best) continue;
            bool is_max = true;
            for (int dr = -1; dr <= 1 && is_max; ++dr)
                for (int dc = -1; dc <= 1; ++dc)
                    if (score(r + dr, c + dc) > s) {
                        is_max = false;
                        break;
                    }
            if (is_max) cands.push_back({s, r, c});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.score > y.score; });

    std::vector<Candidate> picked;
    const double min_d2 = params.min_distance_px * params.min_distance_px;
    for (const Candidate& cand : cands) {
        bool far = true;
        for (const Candidate& p : picked) {
            const double dr = cand.row - p.row, dc = cand.col - p.col;
            if (dr * dr + dc * dc < min_d2) {
                far = false;
                break;
            }
        }
        if (far) picked.push_back(cand);
        if (static_cast<int>(picked.size()) == params.count) break;
    }
    if (static_cast<int>(picked.size()) < params.count)
        throw TooFewCorners("found " + std::to_string(picked.size()) + " of " + std::to_string(params.count) +
                            " corners");

    std::vector<PixelPoint> out;
    for (const Candidate& p : picked) {
        double sw = 0.0, su = 0.0, sv = 0.0;
        for (int r = std::max(0, p.row - half); r <= std::min(img.h - 1, p.row + half); ++r)
            for (int c = std::max(0, p.col - half); c <= std::min(img.w - 1, p.col + half); ++c) {
                const double s = score(r, c);
                sw += s;
                su += s * c;
                sv += s * r;
            }
        // Edge gradients are orthogonal to the offset from the true corner:
        // solve sum(g g^T) q = sum(g g^T p) over a window, a few times.
        double qu = su / sw, qv = sv / sw;
        const int reach = half + static_cast<int>(std::ceil(2.0 * params.smoothing_sigma)) + 1;
        for (int iter = 0; iter < 5; ++iter) {
            double gxx = 0.0, gxy = 0.0, gyy = 0.0, bx = 0.0, by = 0.0;
            const int cr = static_cast<int>(std::lround(qv)), cc = static_cast<int>(std::lround(qu));
            for (int r = std::max(1, cr - reach); r <= std::min(img.h - 2, cr + reach); ++r)
                for (int c = std::max(1, cc - reach); c <= std::min(img.w - 2, cc + reach); ++c) {
                    const double gx = 0.5 * (smooth(r, c + 1) - smooth(r, c - 1));
                    const double gy = 0.5 * (smooth(r + 1, c) - smooth(r - 1, c));
                    gxx += gx * gx;
                    gxy += gx * gy;
                    gyy += gy * gy;
                    bx += gx * gx * c + gx * gy * r;
                    by += gx * gy * c + gy * gy * r;
                }
            const double det = gxx * gyy - gxy * gxy;
            if (!(det > 1e-12 * (gxx + gyy) * (gxx + gyy))) break;
            const double nu = (gyy * bx - gxy * by) / det, nv = (gxx * by - gxy * bx) / det;
            if (std::hypot(nu - su / sw, nv - sv / sw) > reach) break;
            const bool settled = std::hypot(nu - qu, nv - qv) < 1e-3;
            qu = nu;
            qv = nv;
            if (settled) break;
        }
        out.push_back({qu + c0 + 0.5, qv + r0 + 0.5});
    }
    return out;
}

BitMask fill_convex_hull(const BitMask& mask) {
    struct P {
        double u, v;
    };
    std::vector<P> pts;
    for (int r = 0; r < mask.height(); ++r) {
        int left = -1, right = -1;
        for (int c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            if (left < 0) left = c;
            right = c;
        }
        if (left < 0) continue;
        pts.push_back({left + 0.5, r + 0.5});
        if (right != left) pts.push_back({right + 0.5, r + 0.5});
    }
    if (pts.size() < 3) return mask;
    std::sort(pts.begin(), pts.end(), [](const P& a, const P& b) { return a.u < b.u || (a.u == b.u && a.v < b.v); });
    auto cross = [](const P& o, const P& a, const P& b) { return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u); };
    std::vector<P> hull(2 * pts.size());
    std::size_t k = 0;
    for (const P& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) return mask;

    BitMask out = mask;
    double vmin = hull[0].v, vmax = hull[0].v;
    for (const P& p : hull) {
        vmin = std::min(vmin, p.v);
        vmax = std::max(vmax, p.v);
    }
    const double eps = 1e-9;
    for (int r = static_cast<int>(vmin - 0.5); r <= static_cast<int>(vmax - 0.5); ++r) {
        const double y = r + 0.5;
        double xl = std::numeric_limits<double>::infinity(), xr = -xl;
        for (std::size_t i = 0; i < hull.size(); ++i) {
            const P& a = hull[i];
            const P& b = hull[(i + 1) % hull.size()];
            if (y < std::min(a.v, b.v) - eps || y > std::max(a.v, b.v) + eps) continue;
            if (std::abs(b.v - a.v) < eps) {
                xl = std::min({xl, a.u, b.u});
                xr = std::max({xr, a.u, b.u});
            } else {
                const double x = a.u + (y - a.v) * (b.u - a.u) / (b.v - a.v);
                xl = std::min(xl, x);
                xr = std::max(xr, x);
            }
        }
        if (xl > xr) continue;
        const int c0 = std::max(0, static_cast<int>(std::ceil(xl - 0.5 - eps)));
        const int c1 = std::min(mask.width() - 1, static_cast<int>(std::floor(xr - 0.5 + eps)));
        for (int c = c0; c <= c1; ++c) out.set(r, c);
    }
    return out;
}

namespace {

struct Line {
    // n . p = d with |n| = 1
    double nu = 0.0, nv = 0.0, d = 0.0;
};

std::optional<Line> fit_line(const std::vector<PixelPoint>& pts) {
    if (pts.size() < 2) return std::nullopt;
    double mu = 0.0, mv = 0.0;
    for (const auto& p : pts) {
        mu += p.u;
        mv += p.v;
    }
    mu /= static_cast<double>(pts.size());
    mv /= static_cast<double>(pts.size());
    double suu = 0.0, suv = 0.0, svv = 0.0;
    for (const auto& p : pts) {
        suu += (p.u - mu) * (p.u - mu);
        suv += (p.u - mu) * (p.v - mv);
        svv += (p.v - mv) * (p.v - mv);
    }
    // Normal = eigenvector of the scatter matrix with the smaller eigenvalue.
    const double theta = 0.5 * std::atan2(2.0 * suv, suu - svv);
    Line l{-std::sin(theta), std::cos(theta), 0.0};
    l.d = l.nu * mu + l.nv * mv;
    return l;
}

std::optional<Line> robust_line(std::vector<PixelPoint> pts) {
    constexpr std::size_t kMinPoints = 10;
    if (pts.size() < kMinPoints) return std::nullopt;
    auto line = fit_line(pts);
    for (int iter = 0; iter < 5 && line; ++iter) {
        std::vector<double> res;
        res.reserve(pts.size());
        for (const auto& p : pts) res.push_back(std::abs(line->nu * p.u + line->nv * p.v - line->d));
        std::vector<double> sorted = res;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
        const double cutoff = std::max(1.0, 3.0 * 1.4826 * sorted[sorted.size() / 2]);
        std::vector<PixelPoint> kept;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (res[i] <= cutoff) kept.push_back(pts[i]);
        if (kept.size() == pts.size() || kept.size() < kMinPoints) break;
        pts = std::move(kept);
        line = fit_line(pts);
    }
    return line;
}

}  // namespace

geom::CornerSet refine_corners(const BitMask& blob, const geom::CornerSet& corners, double max_shift_px) {
    const int w = blob.width(), h = blob.height();
    std::vector<int> top(static_cast<std::size_t>(w), -1), bottom(static_cast<std::size_t>(w), -1);
    std::vector<int> left(static_cast<std::size_t>(h), -1), right(static_cast<std::size_t>(h), -1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!blob.at(r, c)) continue;
            if (top[static_cast<std::size_t>(c)] < 0) top[static_cast<std::size_t>(c)] = r;
            bottom[static_cast<std::size_t>(c)] = r;
            if (left[static_cast<std::size_t>(r)] < 0) left[static_cast<std::size_t>(r)] = c;
            right[static_cast<std::size_t>(r)] = c;
        }
    double cu = 0.0, cv = 0.0;
    for (const auto& p : corners.points) {
        cu += p.u / 4.0;
        cv += p.v / 4.0;
    }

    std::array<std::optional<Line>, 4> sides;
    for (std::size_t i = 0; i < 4; ++i) {
        const PixelPoint& a = corners.points[i];
        const PixelPoint& b = corners.points[(i + 1) % 4];
        const double du = b.u - a.u, dv = b.v - a.v;
        const double len = std::hypot(du, dv);
        if (!(len > 0.0)) continue;
        const double trim = std::max(8.0, 0.08 * len);
        std::vector<PixelPoint> pts;
        if (std::abs(du) >= std::abs(dv)) {
            const double lo = std::min(a.u, b.u) + trim * std::abs(du) / len;
            const double hi = std::max(a.u, b.u) - trim * std::abs(du) / len;
            const bool upper = 0.5 * (a.v + b.v) < cv;
            for (int c = std::max(0, static_cast<int>(lo)); c < std::min(w, static_cast<int>(hi) + 1); ++c) {
                const double x = c + 0.5;
                if (x < lo || x > hi || top[static_cast<std::size_t>(c)] < 0) continue;
                pts.push_back({x, upper ? top[static_cast<std::size_t>(c)] : bottom[static_cast<std::size_t>(c)] + 1.0});
            }
        } else {
            const double lo = std::min(a.v, b.v) + trim * std::abs(dv) / len;
            const double hi = std::max(a.v, b.v) - trim * std::abs(dv) / len;
            const bool leftmost = 0.5 * (a.u + b.u) < cu;
            for (int r = std::max(0, static_cast<int>(lo)); r < std::min(h, static_cast<int>(hi) + 1); ++r) {
                const double y = r + 0.5;
                if (y < lo || y > hi || left[static_cast<std::size_t>(r)] < 0) continue;
                pts.push_back({leftmost ? left[static_cast<std::size_t>(r)] : right[static_cast<std::size_t>(r)] + 1.0, y});
            }
        }
        sides[i] = robust_line(std::move(pts));
    }

    std::array<PixelPoint, 4> out = corners.points;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& l1 = sides[(i + 3) % 4];
        const auto& l2 = sides[i];
        if (!l1 || !l2) continue;
        const double det = l1->nu * l2->nv - l1->nv * l2->nu;
        if (std::abs(det) < 0.1) continue;
        const PixelPoint p{(l1->d * l2->nv - l1->nv * l2->d) / det, (l1->nu * l2->d - l1->d * l2->nu) / det};
        if (std::hypot(p.u - out[i].u, p.v - out[i].v) <= max_shift_px) out[i] = p;
    }
    return order_corners(out);
}

geom::CornerSet order_corners(const std::array<PixelPoint, 4>& points) {
    double cu = 0.0, cv = 0.0, scale = 0.0;
    for (const auto& p : points) {
        if (!std::isfinite(p.u) || !std::isfinite(p.v)) throw DegenerateQuad("non-finite corner");
        cu += p.u / 4.0;
        cv += p.v / 4.0;
    }
    for (const auto& p : points) scale = std::max(scale, std::hypot(p.u - cu, p.v - cv));
    const double eps = 1e-9 * std::max(1.0, scale);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            if (std::hypot(points[i].u - points[j].u, points[i].v - points[j].v) <= eps)
                throw DegenerateQuad("duplicate corner points");
            for (std::size_t k = j + 1; k < 4; ++k) {
                const double cross = (points[j].u - points[i].u) * (points[k].v - points[i].v) -
                                     (points[j].v - points[i].v) * (points[k].u - points[i].u);
                if (std::abs(cross) <= eps * std::max(1.0, scale)) throw DegenerateQuad("collinear corner points");
            }
        }
    }
    std::array<std::pair<double, std::size_t>, 4> keyed;
    for (std::size_t i = 0; i < 4; ++i) {
        double a = std::atan2(points[i].v - cv, points[i].u - cu);
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        keyed[i] = {a, i};
    }
    std::sort(keyed.begin(), keyed.end());
    geom::CornerSet out;
    for (std::size_t i = 0; i < 4; ++i) out.points[i] = points[keyed[i].second];
    return out;
}

FeatureVector features(const geom::CornerSet& c) {
    FeatureVector f{};
    for (std::size_t i = 0; i < 4; ++i) {
        f[2 * i] = c.points[i].u;
        f[2 * i + 1] = c.points[i].v;
    }
    return f;
}

int default_close_radius(double row_readout_us, double bit_rate_hz) {
    if (!(row_readout_us > 0.0) || !(bit_rate_hz > 0.0)) throw std::invalid_argument("timing must be positive");
    // Longest dark run: two off levels, as a differential Manchester 1 bit.
    const double dark_rows = 2.0 * (1e6 / (2.0 * bit_rate_hz)) / row_readout_us;
    return static_cast<int>(std::ceil(dark_rows / 2.0)) + 1;
}

bool quad_is_sane(const geom::CornerSet& c, long long component_pixels, double min_area_ratio) {
    int sign = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = c.points[i];
        const auto& b = c.points[(i + 1) % 4];
        const auto& d = c.points[(i + 2) % 4];
        const double cross = (b.u - a.u) * (d.v - b.v) - (b.v - a.v) * (d.u - b.u);
        const int s = cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) return false;
        sign = s;
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = c.points[i];
        const auto& b = c.points[(i + 1) % 4];
        twice += a.u * b.v - b.u * a.v;
    }
    return std::abs(twice) / 2.0 >= min_area_ratio * static_cast<double>(component_pixels);
}

geom::CornerSet extract_corners(const render::Frame& frame, const PipelineParams& params) {
    BoundingBox box{frame.height(), frame.width(), -1, -1};
    for (int r = 0; r < frame.height(); ++r) {
        const auto row = frame.row(r);
        int first = -1, last = -1;
        for (int c = 0; c < frame.width(); ++c)
            if (row[static_cast<std::size_t>(c)] >= params.threshold) {
                if (first < 0) first = c;
                last = c;
            }
        if (first < 0) continue;
        box.row0 = std::min(box.row0, r);
        box.row1 = r;
        box.col0 = std::min(box.col0, first);
        box.col1 = std::max(box.col1, last);
    }
    if (box.row1 < 0) throw EmptyMask("no pixel reaches the threshold");

    // Work on a window large enough that the border never touches the closed blob.
    const int margin = 2 * params.close_radius + 2;
    const int r0 = std::max(0, box.row0 - margin), r1 = std::min(frame.height() - 1, box.row1 + margin);
    const int c0 = std::max(0, box.col0 - margin), c1 = std::min(frame.width() - 1, box.col1 + margin);
    BitMask crop(c1 - c0 + 1, r1 - r0 + 1);
    for (int r = r0; r <= r1; ++r) {
        const auto row = frame.row(r);
        for (int c = c0; c <= c1; ++c)
            if (row[static_cast<std::size_t>(c)] >= params.threshold) crop.set(r - r0, c - c0);
    }

    BitMask blob = largest_component(close(crop, params.close_radius));
    if (params.fill_hull) blob = fill_convex_hull(blob);
    CornerParams cp = params.corners;
    cp.min_distance_px =
        std::max(cp.min_distance_px, params.min_distance_area_ratio * std::sqrt(static_cast<double>(blob.count())));
    const auto pts = detect_corners(blob, cp);
    if (pts.size() != 4) throw VisionFailure("expected four corners");
    geom::CornerSet corners = order_corners({pts[0], pts[1], pts[2], pts[3]});
    if (!quad_is_sane(corners, blob.count(), params.min_area_ratio))
        throw VisionFailure("detected corners fail the convexity/area check");
    if (params.refine_edges) corners = refine_corners(blob, corners);
    if (!quad_is_sane(corners, blob.count(), params.min_area_ratio))
        throw VisionFailure("corner quad fails the convexity/area check");
    for (auto& p : corners.points) {
        p.u += c0;
        p.v += r0;
    }
    return corners;
}

}  // namespace vlp::vision
