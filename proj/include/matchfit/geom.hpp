#pragma once

#include <matchfit/errors.hpp>

// Boost.Geometry 1.74 ships a "rescale to integer grid" overlay policy that
// quantizes coordinates internally and breaks area conservation at the 1e-8
// level even for clean inputs. Disabling it restores plain floating-point
// overlay, which conserves area to machine precision on cleaned polygons.
#ifndef BOOST_GEOMETRY_NO_ROBUSTNESS
#define BOOST_GEOMETRY_NO_ROBUSTNESS
#endif

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace matchfit {

struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

inline Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }
inline Point2D operator*(double s, Point2D p) { return {s * p.x, s * p.y}; }
inline double dot(Point2D a, Point2D b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2D p) { return std::hypot(p.x, p.y); }
inline double distance(Point2D a, Point2D b) { return norm(a - b); }

using Ring = std::vector<Point2D>;  // open storage: first vertex not repeated

/// Simple polygon with optional holes. Exterior CCW, holes CW.
struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

struct MultiPolygon {
    std::vector<Polygon> parts;
};

struct BoundingBox {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();

    void expand(Point2D p) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    void expand(const BoundingBox& o) {
        min_x = std::min(min_x, o.min_x);
        min_y = std::min(min_y, o.min_y);
        max_x = std::max(max_x, o.max_x);
        max_y = std::max(max_y, o.max_y);
    }
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    Point2D center() const { return {(min_x + max_x) / 2.0, (min_y + max_y) / 2.0}; }
    bool contains(Point2D p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
};

inline double signed_ring_area(const Ring& r) {
    double a = 0.0;
    const size_t n = r.size();
    for (size_t i = 0; i < n; ++i) {
        const Point2D& p = r[i];
        const Point2D& q = r[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

inline double ring_perimeter(const Ring& r) {
    double len = 0.0;
    const size_t n = r.size();
    for (size_t i = 0; i < n; ++i) len += distance(r[i], r[(i + 1) % n]);
    return len;
}

namespace detail {

constexpr double kSnapTol = 1e-9;      // meters; input vertex-dedup tolerance
constexpr double kOverlayTol = 1e-14;  // meters; overlay outputs must keep their area

inline Ring cleaned_ring(Ring r, double tol = kSnapTol) {
    // Drop the explicit closing vertex and consecutive near-duplicates.
    if (r.size() >= 2 && distance(r.front(), r.back()) < tol) r.pop_back();
    Ring out;
    out.reserve(r.size());
    for (const Point2D& p : r) {
        if (out.empty() || distance(out.back(), p) >= tol) out.push_back(p);
    }
    if (out.size() >= 2 && distance(out.front(), out.back()) < tol) out.pop_back();
    return out;
}

using BPoint = boost::geometry::model::d2::point_xy<double>;
using BPolygon = boost::geometry::model::polygon<BPoint, /*ClockWise=*/false, /*Closed=*/false>;
using BMultiPolygon = boost::geometry::model::multi_polygon<BPolygon>;

inline BPolygon to_boost(const Polygon& p) {
    BPolygon bp;
    for (const Point2D& v : p.exterior) bp.outer().emplace_back(v.x, v.y);
    for (const Ring& h : p.holes) {
        bp.inners().emplace_back();
        for (const Point2D& v : h) bp.inners().back().emplace_back(v.x, v.y);
    }
    boost::geometry::correct(bp);
    return bp;
}

inline MultiPolygon from_boost(const BMultiPolygon& bmp) {
    MultiPolygon out;
    for (const BPolygon& bp : bmp) {
        Polygon p;
        for (const BPoint& v : bp.outer()) p.exterior.push_back({v.x(), v.y()});
        p.exterior = cleaned_ring(std::move(p.exterior), kOverlayTol);
        if (p.exterior.size() < 3) continue;
        for (const auto& inner : bp.inners()) {
            Ring h;
            for (const BPoint& v : inner) h.push_back({v.x(), v.y()});
            h = cleaned_ring(std::move(h), kOverlayTol);
            if (h.size() >= 3) p.holes.push_back(std::move(h));
        }
        if (std::abs(signed_ring_area(p.exterior)) > 0.0) out.parts.push_back(std::move(p));
    }
    return out;
}

}  // namespace detail

/// Normalize a polygon in place: dedup vertices, enforce exterior CCW / holes CW.
/// Throws DegenerateGeometry if the exterior collapses.
inline Polygon make_polygon(Ring exterior, std::vector<Ring> holes = {}) {
    Polygon p;
    p.exterior = detail::cleaned_ring(std::move(exterior));
    if (p.exterior.size() < 3) throw DegenerateGeometry("polygon exterior has fewer than 3 distinct vertices");
    double a = signed_ring_area(p.exterior);
    if (a == 0.0) throw DegenerateGeometry("polygon exterior has zero area");
    if (a < 0.0) std::reverse(p.exterior.begin(), p.exterior.end());
    for (Ring& h : holes) {
        Ring hc = detail::cleaned_ring(std::move(h));
        if (hc.size() < 3) continue;
        if (signed_ring_area(hc) > 0.0) std::reverse(hc.begin(), hc.end());
        p.holes.push_back(std::move(hc));
    }
    return p;
}

inline double area(const Polygon& p) {
    if (p.exterior.size() < 3) throw DegenerateGeometry("area of degenerate polygon");
    double a = std::abs(signed_ring_area(p.exterior));
    if (a == 0.0) throw DegenerateGeometry("zero-area polygon");
    for (const Ring& h : p.holes) a -= std::abs(signed_ring_area(h));
    return std::max(a, 0.0);
}

inline double area(const MultiPolygon& mp) {
    double a = 0.0;
    for (const Polygon& p : mp.parts) a += area(p);
    return a;
}

/// Exterior ring length only; holes do not contribute.
inline double perimeter(const Polygon& p) {
    if (p.exterior.size() < 3) throw DegenerateGeometry("perimeter of degenerate polygon");
    return ring_perimeter(p.exterior);
}

inline Point2D centroid(const Polygon& p) {
    double a_sum = 0.0, cx = 0.0, cy = 0.0;
    // Ring region centroid: (1/6A)·Σ (u+v)·(u×v), signed; weight by ±|area|.
    auto accumulate = [&](const Ring& r, double sign) {
        const size_t n = r.size();
        double a2 = 0.0, x = 0.0, y = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const Point2D& u = r[i];
            const Point2D& v = r[(i + 1) % n];
            const double cross = u.x * v.y - v.x * u.y;
            a2 += cross;
            x += (u.x + v.x) * cross;
            y += (u.y + v.y) * cross;
        }
        if (a2 == 0.0) return;
        const double w = sign * std::abs(a2) / 2.0;
        a_sum += w;
        cx += w * (x / (3.0 * a2));
        cy += w * (y / (3.0 * a2));
    };
    accumulate(p.exterior, 1.0);
    for (const Ring& h : p.holes) accumulate(h, -1.0);
    if (a_sum <= 0.0) throw DegenerateGeometry("centroid of zero-area polygon");
    return {cx / a_sum, cy / a_sum};
}

inline BoundingBox bounds(const Polygon& p) {
    BoundingBox b;
    for (const Point2D& v : p.exterior) b.expand(v);
    return b;
}

inline BoundingBox bounds(const MultiPolygon& mp) {
    BoundingBox b;
    for (const Polygon& p : mp.parts) b.expand(bounds(p));
    return b;
}

inline bool contains(const Polygon& p, Point2D pt) {
    return boost::geometry::covered_by(detail::BPoint(pt.x, pt.y), detail::to_boost(p));
}

namespace detail {

inline void check_overlay_area(double got, double upper, const char* what) {
    const double tol = 1e-9 * std::max(upper, 1.0) + 1e-9;
    if (got < -tol || got > upper + tol)
        throw OverlayFailure(std::string("overlay produced inconsistent area in ") + what);
}

}  // namespace detail

inline MultiPolygon intersect(const Polygon& a, const Polygon& b) {
    detail::BMultiPolygon out;
    boost::geometry::intersection(detail::to_boost(a), detail::to_boost(b), out);
    MultiPolygon mp = detail::from_boost(out);
    detail::check_overlay_area(area(mp), std::min(area(a), area(b)), "intersect");
    return mp;
}

inline MultiPolygon difference(const Polygon& a, const Polygon& b) {
    detail::BMultiPolygon out;
    boost::geometry::difference(detail::to_boost(a), detail::to_boost(b), out);
    MultiPolygon mp = detail::from_boost(out);
    detail::check_overlay_area(area(mp), area(a), "difference");
    return mp;
}

inline MultiPolygon union_(const MultiPolygon& acc, const Polygon& b) {
    detail::BMultiPolygon cur;
    for (const Polygon& p : acc.parts) cur.push_back(detail::to_boost(p));
    detail::BMultiPolygon out;
    boost::geometry::union_(cur, detail::to_boost(b), out);
    return detail::from_boost(out);
}

inline MultiPolygon union_(const MultiPolygon& a, const MultiPolygon& b) {
    detail::BMultiPolygon ba, bb, out;
    for (const Polygon& p : a.parts) ba.push_back(detail::to_boost(p));
    for (const Polygon& p : b.parts) bb.push_back(detail::to_boost(p));
    boost::geometry::union_(ba, bb, out);
    return detail::from_boost(out);
}

/// Union of many polygons by pairwise tree merge (keeps intermediates small).
inline MultiPolygon union_all(std::vector<MultiPolygon> items) {
    if (items.empty()) return {};
    while (items.size() > 1) {
        std::vector<MultiPolygon> next;
        next.reserve((items.size() + 1) / 2);
        for (size_t i = 0; i + 1 < items.size(); i += 2)
            next.push_back(union_(items[i], items[i + 1]));
        if (items.size() % 2) next.push_back(std::move(items.back()));
        items = std::move(next);
    }
    return std::move(items[0]);
}

/// Both halves of the overlay of (a, b) needed by the excess-area metric:
/// area(a ∩ b) and area(b − a), checked for conservation against area(b).
struct PairOverlay {
    double inter_area = 0.0;
    double b_minus_a_area = 0.0;
    MultiPolygon inter;
    MultiPolygon b_minus_a;
};

inline PairOverlay pair_overlay(const Polygon& a, const Polygon& b) {
    PairOverlay r;
    r.inter = intersect(a, b);
    r.b_minus_a = difference(b, a);
    r.inter_area = area(r.inter);
    r.b_minus_a_area = area(r.b_minus_a);
    const double ab = area(b);
    if (std::abs(r.inter_area + r.b_minus_a_area - ab) > 1e-9 * std::max(ab, 1.0) + 1e-9)
        throw OverlayFailure("intersection and difference do not partition the second operand");
    return r;
}

/// Distance from point to segment [a, b].
inline double point_segment_distance(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

inline Point2D project_on_segment(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return a;
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

}  // namespace matchfit
