#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "common.hpp"

namespace stint {

/// Signed area of a ring (shoelace). Positive for counter-clockwise.
inline double ring_signed_area(const Ring& ring) {
    KahanSum acc;
    std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point a = ring[i];
        Point b = ring[(i + 1) % n];
        acc.add(cross(a, b));
    }
    return 0.5 * acc.value();
}

namespace detail {

inline int orient_sign(Point a, Point b, Point c) {
    double v = cross(b - a, c - a);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
}

inline bool on_segment(Point a, Point b, Point p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

/// Proper or improper intersection of closed segments [a,b] and [c,d].
inline bool segments_intersect(Point a, Point b, Point c, Point d) {
    int o1 = orient_sign(a, b, c);
    int o2 = orient_sign(a, b, d);
    int o3 = orient_sign(c, d, a);
    int o4 = orient_sign(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

} // namespace detail

/// A ring is simple when non-adjacent edges never meet and adjacent edges
/// share only their common vertex.
inline bool ring_is_simple(const Ring& ring) {
    std::size_t n = ring.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        Point a = ring[i], b = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            Point c = ring[j], d = ring[(j + 1) % n];
            if (adjacent) {
                // Shared endpoint is fine; anything more means a fold-back.
                Point shared = (j == i + 1) ? b : a;
                Point fa = (j == i + 1) ? a : b;
                Point fd = (j == i + 1) ? d : c;
                if (detail::orient_sign(fa, shared, fd) == 0 &&
                    detail::on_segment(fa, shared, fd) && !(fd.x == shared.x && fd.y == shared.y))
                    return false;
                if (detail::orient_sign(fd, shared, fa) == 0 &&
                    detail::on_segment(fd, shared, fa) && !(fa.x == shared.x && fa.y == shared.y))
                    return false;
                continue;
            }
            if (detail::segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

/// Even-odd point-in-polygon over one ring (half-open crossing rule).
inline bool point_in_ring(Point p, const Ring& ring) {
    bool inside = false;
    std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        Point a = ring[i], b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

/// Binary observation mask on a uniform grid, rows stored south to north.
struct RasterMask {
    double xll = 0.0;
    double yll = 0.0;
    double cell = 0.0;
    int ncols = 0;
    int nrows = 0;
    std::vector<std::uint8_t> inside; // row-major, row 0 = southernmost

    bool contains(Point p) const {
        int cx = static_cast<int>(std::floor((p.x - xll) / cell));
        int cy = static_cast<int>(std::floor((p.y - yll) / cell));
        if (cx < 0 || cy < 0 || cx >= ncols || cy >= nrows) return false;
        return inside[static_cast<std::size_t>(cy) * ncols + cx] != 0;
    }
    double area() const {
        std::size_t k = 0;
        for (std::uint8_t v : inside) k += (v != 0);
        return static_cast<double>(k) * cell * cell;
    }
};

/// Observation region W together with the study period (0, t_max].
/// Rings are stored with outer boundaries counter-clockwise and holes
/// clockwise, so signed areas add up to |W|.
struct Window {
    std::vector<Ring> rings;
    std::optional<RasterMask> raster;
    double t_max = 0.0;
    double area = 0.0;
    BBox bounds;

    bool has_polygon() const { return !rings.empty(); }

    bool contains(Point p) const {
        if (has_polygon()) {
            if (!bounds.contains(p)) return false;
            bool inside = false;
            for (const Ring& r : rings)
                if (point_in_ring(p, r)) inside = !inside;
            return inside;
        }
        if (raster) return raster->contains(p);
        return false;
    }
};

/// One polygon: outer ring first, then holes.
using PolygonRings = std::vector<Ring>;

namespace detail {

inline void normalize_ring(Ring& ring, bool want_ccw, const char* what) {
    if (ring.size() >= 2) {
        Point first = ring.front(), last = ring.back();
        if (first.x == last.x && first.y == last.y) ring.pop_back();
    }
    if (ring.size() < 3)
        throw ValidationError(std::string(what) + " ring has fewer than 3 distinct vertices");
    if (!ring_is_simple(ring))
        throw ValidationError(std::string(what) + " ring is self-intersecting");
    double a = ring_signed_area(ring);
    if (a == 0.0)
        throw ValidationError(std::string(what) + " ring has zero area");
    if ((a > 0) != want_ccw) std::reverse(ring.begin(), ring.end());
}

} // namespace detail

/// Builds a window from explicit polygons. Throws ValidationError on
/// degenerate or self-intersecting rings or nonpositive total area.
inline Window make_window(const std::vector<PolygonRings>& polygons, double t_max,
                          std::optional<RasterMask> raster = std::nullopt) {
    if (!(t_max > 0.0)) throw ValidationError("window t_max must be positive");
    Window w;
    w.t_max = t_max;
    for (const PolygonRings& poly : polygons) {
        if (poly.empty()) throw ValidationError("window polygon has no rings");
        for (std::size_t k = 0; k < poly.size(); ++k) {
            Ring ring = poly[k];
            detail::normalize_ring(ring, k == 0, k == 0 ? "window outer" : "window hole");
            w.rings.push_back(std::move(ring));
        }
    }
    KahanSum area;
    for (const Ring& r : w.rings) {
        area.add(ring_signed_area(r));
        for (Point p : r) w.bounds.expand(p);
    }
    w.area = area.value();
    if (raster) {
        if (!(raster->cell > 0) || raster->ncols <= 0 || raster->nrows <= 0)
            throw ValidationError("raster mask has invalid dimensions");
        double ra = raster->area();
        if (w.rings.empty()) {
            w.area = ra;
            w.bounds = BBox{};
            w.bounds.expand({raster->xll, raster->yll});
            w.bounds.expand({raster->xll + raster->cell * raster->ncols,
                             raster->yll + raster->cell * raster->nrows});
        } else if (!nearly_equal(ra, w.area, 1e-3)) {
            throw ValidationError("raster area disagrees with polygon area beyond 0.1%");
        }
        w.raster = std::move(raster);
    }
    if (!(w.area > 0.0)) throw ValidationError("window area must be positive");
    return w;
}

inline Window make_window_raster(RasterMask raster, double t_max) {
    return make_window({}, t_max, std::move(raster));
}

inline double polygon_area(const Window& w) {
    if (!w.has_polygon()) {
        if (w.raster) return w.raster->area();
        throw ValidationError("window has no geometry");
    }
    KahanSum acc;
    for (const Ring& r : w.rings) acc.add(ring_signed_area(r));
    return acc.value();
}

// ---------------------------------------------------------------------------
// Disc-polygon intersection (exact, via Green's theorem per edge).

namespace detail {

/// Signed angle swept from u to v, in (-pi, pi].
inline double sweep_angle(Point u, Point v) {
    return std::atan2(cross(u, v), dot(u, v));
}

/// Signed contribution of one ring edge (endpoints relative to the disc
/// centre) to the area of disc(r) intersected with the ring's interior.
inline double disc_edge_area(Point a, Point b, double r) {
    Point d = b - a;
    double qa = dot(d, d);
    if (qa == 0.0) return 0.0;
    double qb = 2.0 * dot(a, d);
    double qc = dot(a, a) - r * r;
    double disc = qb * qb - 4.0 * qa * qc;
    double r2 = r * r;
    if (disc <= 0.0) // chord misses (or grazes) the circle: pure arc sweep
        return 0.5 * r2 * sweep_angle(a, b);
    double sq = std::sqrt(disc);
    double t0 = (-qb - sq) / (2.0 * qa);
    double t1 = (-qb + sq) / (2.0 * qa);
    if (t1 <= 0.0 || t0 >= 1.0) return 0.5 * r2 * sweep_angle(a, b);
    double u0 = std::max(t0, 0.0);
    double u1 = std::min(t1, 1.0);
    Point p0 = a + u0 * d;
    Point p1 = a + u1 * d;
    double area = 0.5 * cross(p0, p1);
    if (t0 > 0.0) area += 0.5 * r2 * sweep_angle(a, p0);
    if (t1 < 1.0) area += 0.5 * r2 * sweep_angle(p1, b);
    return area;
}

inline double disc_ring_area(const Ring& ring, Point centre, double r) {
    KahanSum acc;
    std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point a = ring[i] - centre;
        Point b = ring[(i + 1) % n] - centre;
        acc.add(disc_edge_area(a, b, r));
    }
    return acc.value();
}

/// Exact area of disc(centre, r) intersected with an axis-aligned rectangle.
inline double disc_rect_area(Point centre, double r, double x0, double y0, double x1,
                             double y1) {
    if (x1 <= x0 || y1 <= y0) return 0.0;
    Ring rect{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    return disc_ring_area(rect, centre, r);
}

} // namespace detail

/// Area of disc(centre, radius) intersected with W. Exact for polygonal
/// windows; raster-only windows count whole mask cells whose centres fall
/// in the disc.
inline double disc_window_area(Point centre, double radius, const Window& w) {
    if (!(radius >= 0.0)) throw ValidationError("disc radius must be nonnegative");
    if (radius == 0.0) return 0.0;
    if (w.has_polygon()) {
        KahanSum acc;
        for (const Ring& r : w.rings) acc.add(detail::disc_ring_area(r, centre, radius));
        double a = acc.value();
        // Clamp FP noise at the extremes; area is a true intersection.
        return std::min(std::max(a, 0.0), std::min(kPi * radius * radius, w.area));
    }
    if (w.raster) {
        // Exact disc/cell intersection per mask cell, so the raster value
        // matches a polygon tracing of the same cell union.
        const RasterMask& m = *w.raster;
        int x0 = static_cast<int>(std::floor((centre.x - radius - m.xll) / m.cell));
        int x1 = static_cast<int>(std::floor((centre.x + radius - m.xll) / m.cell));
        int y0 = static_cast<int>(std::floor((centre.y - radius - m.yll) / m.cell));
        int y1 = static_cast<int>(std::floor((centre.y + radius - m.yll) / m.cell));
        x0 = std::max(x0, 0); y0 = std::max(y0, 0);
        x1 = std::min(x1, m.ncols - 1); y1 = std::min(y1, m.nrows - 1);
        KahanSum total;
        for (int cy = y0; cy <= y1; ++cy)
            for (int cx = x0; cx <= x1; ++cx) {
                if (!m.inside[static_cast<std::size_t>(cy) * m.ncols + cx]) continue;
                total.add(detail::disc_rect_area(centre, radius,
                                                 m.xll + cx * m.cell, m.yll + cy * m.cell,
                                                 m.xll + (cx + 1) * m.cell,
                                                 m.yll + (cy + 1) * m.cell));
            }
        double a = total.value();
        return std::min(std::max(a, 0.0), std::min(kPi * radius * radius, w.area));
    }
    throw ValidationError("window has no geometry");
}

// ---------------------------------------------------------------------------
// Edge-correction weights.

namespace detail {

/// Collects the angles at which circle(centre, r) crosses the ring edges.
inline void circle_ring_crossings(const Ring& ring, Point centre, double r,
                                  std::vector<double>& angles) {
    std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point a = ring[i] - centre;
        Point d = ring[(i + 1) % n] - centre - a;
        double qa = dot(d, d);
        if (qa == 0.0) continue;
        double qb = 2.0 * dot(a, d);
        double qc = dot(a, a) - r * r;
        double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0) continue;
        double sq = std::sqrt(disc);
        for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
            if (t <= 0.0 || t >= 1.0) continue;
            Point p = a + t * d;
            angles.push_back(std::atan2(p.y, p.x));
        }
    }
}

} // namespace detail

/// Fraction of circle(centre, distance) lying inside W, measured exactly by
/// splitting the circle at boundary crossings and classifying arc midpoints.
inline double circle_inside_fraction(Point centre, double distance, const Window& w) {
    if (distance == 0.0) return w.contains(centre) ? 1.0 : 0.0;
    std::vector<double> angles;
    if (w.has_polygon()) {
        for (const Ring& r : w.rings)
            detail::circle_ring_crossings(r, centre, distance, angles);
    } else if (w.raster) {
        // Raster windows: classify a fixed fan of directions.
        const int kRays = 720;
        int inside = 0;
        for (int k = 0; k < kRays; ++k) {
            double th = (k + 0.5) * (2.0 * kPi / kRays);
            Point p{centre.x + distance * std::cos(th), centre.y + distance * std::sin(th)};
            inside += w.contains(p);
        }
        return static_cast<double>(inside) / kRays;
    } else {
        throw ValidationError("window has no geometry");
    }
    if (angles.empty()) {
        Point probe{centre.x + distance, centre.y};
        return w.contains(probe) ? 1.0 : 0.0;
    }
    std::sort(angles.begin(), angles.end());
    angles.push_back(angles.front() + 2.0 * kPi);
    double inside_len = 0.0;
    for (std::size_t k = 0; k + 1 < angles.size(); ++k) {
        double th0 = angles[k], th1 = angles[k + 1];
        double mid = 0.5 * (th0 + th1);
        Point p{centre.x + distance * std::cos(mid), centre.y + distance * std::sin(mid)};
        if (w.contains(p)) inside_len += th1 - th0;
    }
    return inside_len / (2.0 * kPi);
}

/// Ripley isotropic correction: reciprocal of the circle fraction inside W.
/// Equals 1 whenever the circle does not cross the boundary. Throws
/// ComputeError when the circle lies entirely outside W.
inline double ripley_weight(Point centre, double distance, const Window& w) {
    if (!(distance >= 0.0)) throw ValidationError("ripley_weight distance must be nonnegative");
    if (distance == 0.0) return 1.0;
    double frac = circle_inside_fraction(centre, distance, w);
    if (frac <= 0.0)
        throw ComputeError("edge-correction circle lies entirely outside the window");
    return 1.0 / frac;
}

/// Temporal edge correction: reciprocal of the fraction of {t - lag, t + lag}
/// inside (0, t_max]. Value is 1 when both endpoints are interior, 2 when one
/// is censored. Requires at least one endpoint inside, which always holds
/// when a partner event at that lag was observed.
inline double temporal_weight(double t, double lag, double t_max) {
    if (!(lag >= 0.0)) throw ValidationError("temporal_weight lag must be nonnegative");
    if (lag == 0.0) return 1.0;
    bool lo = (t - lag) > 0.0;
    bool hi = (t + lag) <= t_max;
    if (!lo && !hi)
        throw ComputeError("temporal_weight: both lagged endpoints censored");
    return (lo && hi) ? 1.0 : 2.0;
}

// ---------------------------------------------------------------------------
// Rectangle clipping (Sutherland-Hodgman) for pixel bookkeeping.

namespace detail {

enum class RectSide { Left, Right, Bottom, Top };

inline bool rect_inside(Point p, RectSide s, double lo, double hi) {
    switch (s) {
        case RectSide::Left: return p.x >= lo;
        case RectSide::Right: return p.x <= hi;
        case RectSide::Bottom: return p.y >= lo;
        case RectSide::Top: return p.y <= hi;
    }
    return false;
}

inline Point rect_cross(Point a, Point b, RectSide s, double v) {
    double t;
    if (s == RectSide::Left || s == RectSide::Right)
        t = (v - a.x) / (b.x - a.x);
    else
        t = (v - a.y) / (b.y - a.y);
    return a + t * (b - a);
}

inline void clip_side(Ring& ring, RectSide s, double lo, double hi, double v) {
    if (ring.empty()) return;
    Ring out;
    out.reserve(ring.size() + 4);
    std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        Point cur = ring[i];
        Point prev = ring[(i + n - 1) % n];
        bool cin = rect_inside(cur, s, lo, hi);
        bool pin = rect_inside(prev, s, lo, hi);
        if (cin) {
            if (!pin) out.push_back(rect_cross(prev, cur, s, v));
            out.push_back(cur);
        } else if (pin) {
            out.push_back(rect_cross(prev, cur, s, v));
        }
    }
    ring = std::move(out);
}

} // namespace detail

/// Clips a ring to an axis-aligned rectangle. Preserves orientation, so
/// signed areas of clipped rings still sum correctly over holes.
inline Ring clip_ring_to_rect(const Ring& ring, double x0, double y0, double x1, double y1) {
    Ring r = ring;
    detail::clip_side(r, detail::RectSide::Left, x0, x1, x0);
    detail::clip_side(r, detail::RectSide::Right, x0, x1, x1);
    detail::clip_side(r, detail::RectSide::Bottom, y0, y1, y0);
    detail::clip_side(r, detail::RectSide::Top, y0, y1, y1);
    return r;
}

/// Area of W intersected with [x0,x1] x [y0,y1].
inline double window_rect_area(const Window& w, double x0, double y0, double x1, double y1) {
    if (w.has_polygon()) {
        KahanSum acc;
        for (const Ring& r : w.rings)
            acc.add(ring_signed_area(clip_ring_to_rect(r, x0, y0, x1, y1)));
        return std::max(acc.value(), 0.0);
    }
    if (w.raster) {
        const RasterMask& m = *w.raster;
        double total = 0.0;
        int cx0 = std::max(0, static_cast<int>(std::floor((x0 - m.xll) / m.cell)));
        int cx1 = std::min(m.ncols - 1, static_cast<int>(std::floor((x1 - m.xll) / m.cell)));
        int cy0 = std::max(0, static_cast<int>(std::floor((y0 - m.yll) / m.cell)));
        int cy1 = std::min(m.nrows - 1, static_cast<int>(std::floor((y1 - m.yll) / m.cell)));
        for (int cy = cy0; cy <= cy1; ++cy)
            for (int cx = cx0; cx <= cx1; ++cx) {
                if (!m.inside[static_cast<std::size_t>(cy) * m.ncols + cx]) continue;
                double ox = std::min(x1, m.xll + (cx + 1) * m.cell) - std::max(x0, m.xll + cx * m.cell);
                double oy = std::min(y1, m.yll + (cy + 1) * m.cell) - std::max(y0, m.yll + cy * m.cell);
                if (ox > 0 && oy > 0) total += ox * oy;
            }
        return total;
    }
    throw ValidationError("window has no geometry");
}

/// Area of disc(centre, radius) inside both W and the rectangle.
inline double disc_window_rect_area(Point centre, double radius, const Window& w,
                                    double x0, double y0, double x1, double y1) {
    if (!w.has_polygon()) {
        // Raster path: count mask cells inside both the disc and the rect.
        if (!w.raster) throw ValidationError("window has no geometry");
        const RasterMask& m = *w.raster;
        KahanSum total;
        int cx0 = std::max(0, static_cast<int>(std::floor((std::max(x0, centre.x - radius) - m.xll) / m.cell)));
        int cx1 = std::min(m.ncols - 1, static_cast<int>(std::floor((std::min(x1, centre.x + radius) - m.xll) / m.cell)));
        int cy0 = std::max(0, static_cast<int>(std::floor((std::max(y0, centre.y - radius) - m.yll) / m.cell)));
        int cy1 = std::min(m.nrows - 1, static_cast<int>(std::floor((std::min(y1, centre.y + radius) - m.yll) / m.cell)));
        for (int cy = cy0; cy <= cy1; ++cy)
            for (int cx = cx0; cx <= cx1; ++cx) {
                if (!m.inside[static_cast<std::size_t>(cy) * m.ncols + cx]) continue;
                total.add(detail::disc_rect_area(
                    centre, radius, std::max(x0, m.xll + cx * m.cell),
                    std::max(y0, m.yll + cy * m.cell),
                    std::min(x1, m.xll + (cx + 1) * m.cell),
                    std::min(y1, m.yll + (cy + 1) * m.cell)));
            }
        return std::max(total.value(), 0.0);
    }
    KahanSum acc;
    for (const Ring& r : w.rings) {
        Ring clipped = clip_ring_to_rect(r, x0, y0, x1, y1);
        if (clipped.size() >= 3)
            acc.add(detail::disc_ring_area(clipped, centre, radius));
    }
    return std::max(acc.value(), 0.0);
}

// ---------------------------------------------------------------------------
// Triangulation for exact uniform sampling inside polygons.

struct Triangle {
    Point a, b, c;
    double area() const { return 0.5 * std::abs(cross(b - a, c - a)); }
};

namespace detail {

inline bool point_in_triangle(Point p, Point a, Point b, Point c) {
    int s1 = orient_sign(a, b, p);
    int s2 = orient_sign(b, c, p);
    int s3 = orient_sign(c, a, p);
    bool has_neg = (s1 < 0) || (s2 < 0) || (s3 < 0);
    bool has_pos = (s1 > 0) || (s2 > 0) || (s3 > 0);
    return !(has_neg && has_pos);
}

} // namespace detail

/// Ear-clipping triangulation of a simple ring (no holes). Returns an empty
/// vector when the ring resists clipping numerically; callers fall back to
/// bounding-box rejection sampling in that case.
inline std::vector<Triangle> triangulate_ring(Ring ring) {
    std::vector<Triangle> tris;
    if (ring.size() < 3) return tris;
    if (ring_signed_area(ring) < 0) std::reverse(ring.begin(), ring.end());
    std::vector<std::size_t> idx(ring.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::size_t guard = 0;
    std::size_t guard_limit = 2 * ring.size() * ring.size() + 16;
    while (idx.size() > 3) {
        bool clipped = false;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            std::size_t ip = idx[(k + idx.size() - 1) % idx.size()];
            std::size_t ic = idx[k];
            std::size_t in = idx[(k + 1) % idx.size()];
            Point a = ring[ip], b = ring[ic], c = ring[in];
            if (detail::orient_sign(a, b, c) <= 0) continue; // reflex or flat
            bool ear = true;
            for (std::size_t other : idx) {
                if (other == ip || other == ic || other == in) continue;
                if (detail::point_in_triangle(ring[other], a, b, c)) { ear = false; break; }
            }
            if (!ear) continue;
            tris.push_back({a, b, c});
            idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
            clipped = true;
            break;
        }
        if (!clipped || ++guard > guard_limit) return {};
    }
    tris.push_back({ring[idx[0]], ring[idx[1]], ring[idx[2]]});
    return tris;
}

} // namespace stint
