#pragma once

#include <matchfit/geom.hpp>
#include <matchfit/model.hpp>
#include <matchfit/spatial_index.hpp>

#include <map>
#include <string>
#include <vector>

namespace matchfit {

/// Farm plots whose overlap with a survey plot is below this are overlay noise.
constexpr double kMinIntersectionArea = 1e-6;  // m^2

struct ExcessAreaReport {
    std::map<std::string, double> per_plot;  // plot-id -> m^2
    double total = 0.0;
};

struct DtbResult {
    double plot_dtb = 0.0;               // meters
    std::vector<double> per_edge;        // meters, one per exterior edge of Q
};

/// Index over a farm set for repeated plot-vs-farms queries.
class FarmIndex {
public:
    explicit FarmIndex(const FarmSet& f) : farms_(&f), grid_(50.0) {
        for (size_t i = 0; i < f.plots.size(); ++i) grid_.insert(i, bounds(f.plots[i].shape));
    }

    std::vector<size_t> candidates(const BoundingBox& b) const { return grid_.query(b); }
    const FarmSet& farms() const { return *farms_; }

private:
    const FarmSet* farms_;
    SpatialGrid grid_;
};

/// ea(Q, P) = min(area(Q ∩ P), area(P − Q)); 0 when effectively disjoint.
/// area(P − Q) = area(P) − area(Q ∩ P) by the overlay conservation contract,
/// which saves one overlay per pair on the optimizer's hot path.
inline double excess_area_pair(const Polygon& q, const Polygon& p) {
    const double inter = area(intersect(q, p));
    if (inter < kMinIntersectionArea) return 0.0;
    return std::min(inter, std::max(area(p) - inter, 0.0));
}

/// coverage_out, when given, accumulates area(Q ∩ P) over all farm plots; the
/// optimizer uses it to tell a genuine zero-ea fit from a plot that simply
/// drifted off the farm set (ea is 0 for disjoint inputs by definition).
inline double excess_area_plot(const Polygon& q, const FarmIndex& index,
                               double* coverage_out = nullptr) {
    double total = 0.0;
    const BoundingBox qb = bounds(q);
    for (size_t i : index.candidates(qb)) {
        const Polygon& p = index.farms().plots[i].shape;
        const BoundingBox pb = bounds(p);
        if (pb.min_x > qb.max_x || pb.max_x < qb.min_x || pb.min_y > qb.max_y || pb.max_y < qb.min_y)
            continue;
        const double inter = area(intersect(q, p));
        if (inter < kMinIntersectionArea) continue;
        if (coverage_out) *coverage_out += inter;
        total += std::min(inter, std::max(area(p) - inter, 0.0));
    }
    return total;
}

inline double excess_area_plot(const SurveyPlot& q, const FarmSet& f) {
    FarmIndex index(f);
    return excess_area_plot(q.shape, index);
}

inline ExcessAreaReport excess_area_map(const SurveyMap& m, const FarmSet& f) {
    FarmIndex index(f);
    ExcessAreaReport rep;
    for (const auto& plot : m.plots) {
        const double ea = excess_area_plot(plot.shape, index);
        rep.per_plot[plot.id] = ea;
        rep.total += ea;
    }
    return rep;
}

namespace detail {

struct Tri {
    Point2D a, b, c;
    double area() const {
        return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }
    Point2D centroid() const { return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0}; }
};

inline double cross2(Point2D o, Point2D u, Point2D v) {
    return (u.x - o.x) * (v.y - o.y) - (v.x - o.x) * (u.y - o.y);
}

inline bool point_in_tri(Point2D p, Point2D a, Point2D b, Point2D c) {
    const double d1 = cross2(a, b, p);
    const double d2 = cross2(b, c, p);
    const double d3 = cross2(c, a, p);
    const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(neg && pos);
}

/// Ear clipping on a CCW ring. On numerical failure the remainder is emitted
/// as a fan from its centroid-ish vertex; total area is conserved either way.
inline void ear_clip(Ring ring, std::vector<Tri>& out) {
    if (signed_ring_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
    while (ring.size() > 3) {
        const size_t n = ring.size();
        bool clipped = false;
        for (size_t i = 0; i < n; ++i) {
            const Point2D a = ring[(i + n - 1) % n], b = ring[i], c = ring[(i + 1) % n];
            if (cross2(a, b, c) <= 0.0) continue;  // reflex or collinear
            bool ear = true;
            for (size_t j = 0; j < n && ear; ++j) {
                if (j == (i + n - 1) % n || j == i || j == (i + 1) % n) continue;
                if (point_in_tri(ring[j], a, b, c)) ear = false;
            }
            if (!ear) continue;
            out.push_back({a, b, c});
            ring.erase(ring.begin() + static_cast<long>(i));
            clipped = true;
            break;
        }
        if (!clipped) {
            // Degenerate remainder: fan from vertex 0 (signed areas still sum correctly
            // because downstream only consumes |area| per triangle of a near-flat rest).
            for (size_t i = 1; i + 1 < ring.size(); ++i) out.push_back({ring[0], ring[i], ring[i + 1]});
            return;
        }
    }
    if (ring.size() == 3) out.push_back({ring[0], ring[1], ring[2]});
}

/// Split triangles until the longest edge is below max_edge (bounded depth).
inline void refine_tri(const Tri& t, double max_edge, int depth, std::vector<Tri>& out) {
    const double ab = distance(t.a, t.b), bc = distance(t.b, t.c), ca = distance(t.c, t.a);
    const double longest = std::max({ab, bc, ca});
    if (depth <= 0 || longest <= max_edge) {
        out.push_back(t);
        return;
    }
    Tri t1, t2;
    if (longest == ab) {
        const Point2D m = 0.5 * (t.a + t.b);
        t1 = {t.a, m, t.c};
        t2 = {m, t.b, t.c};
    } else if (longest == bc) {
        const Point2D m = 0.5 * (t.b + t.c);
        t1 = {t.a, t.b, m};
        t2 = {t.a, m, t.c};
    } else {
        const Point2D m = 0.5 * (t.c + t.a);
        t1 = {t.a, t.b, m};
        t2 = {m, t.b, t.c};
    }
    refine_tri(t1, max_edge, depth - 1, out);
    refine_tri(t2, max_edge, depth - 1, out);
}

inline size_t nearest_edge(const Ring& exterior, Point2D p) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const size_t n = exterior.size();
    for (size_t i = 0; i < n; ++i) {
        const double d = point_segment_distance(p, exterior[i], exterior[(i + 1) % n]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace detail

/// dtb(Q, F): ea(Q, F) / perimeter(Q), attributed across exterior edges by
/// triangulating each excess-area fragment and assigning every (small)
/// triangle to the edge nearest its centroid.
inline DtbResult dtb(const Polygon& q, const FarmIndex& index) {
    const double perim = perimeter(q);
    if (perim <= 0.0) throw DegenerateGeometry("dtb of zero-perimeter plot");

    const size_t n_edges = q.exterior.size();
    std::vector<double> edge_area(n_edges, 0.0);
    double total_ea = 0.0;

    const BoundingBox qb = bounds(q);
    for (size_t i : index.candidates(qb)) {
        const Polygon& p = index.farms().plots[i].shape;
        PairOverlay ov = pair_overlay(q, p);
        if (ov.inter_area < kMinIntersectionArea) continue;
        const bool take_inter = ov.inter_area <= ov.b_minus_a_area;
        const MultiPolygon& frag = take_inter ? ov.inter : ov.b_minus_a;
        const double frag_area = take_inter ? ov.inter_area : ov.b_minus_a_area;
        total_ea += frag_area;

        for (const Polygon& part : frag.parts) {
            std::vector<detail::Tri> tris, fine;
            detail::ear_clip(part.exterior, tris);
            for (const auto& t : tris) detail::refine_tri(t, 10.0, 8, fine);
            for (const auto& t : fine)
                edge_area[detail::nearest_edge(q.exterior, t.centroid())] += t.area();
            // Holes: subtract their area from the nearest edges the same way.
            for (const Ring& h : part.holes) {
                std::vector<detail::Tri> htris, hfine;
                detail::ear_clip(h, htris);
                for (const auto& t : htris) detail::refine_tri(t, 10.0, 8, hfine);
                for (const auto& t : hfine)
                    edge_area[detail::nearest_edge(q.exterior, t.centroid())] -= t.area();
            }
        }
    }

    DtbResult r;
    r.plot_dtb = total_ea / perim;
    r.per_edge.resize(n_edges, 0.0);
    for (size_t e = 0; e < n_edges; ++e) {
        const double len = distance(q.exterior[e], q.exterior[(e + 1) % n_edges]);
        r.per_edge[e] = len > 0.0 ? std::max(edge_area[e], 0.0) / len : 0.0;
    }
    return r;
}

inline DtbResult dtb(const SurveyPlot& q, const FarmSet& f) {
    FarmIndex index(f);
    return dtb(q.shape, index);
}

struct DtbReport {
    std::map<std::string, double> per_plot;                        // plot-id -> meters
    std::map<std::pair<std::string, size_t>, double> per_edge;     // (plot-id, edge) -> meters
};

inline DtbReport dtb_map(const SurveyMap& m, const FarmSet& f) {
    FarmIndex index(f);
    DtbReport rep;
    for (const auto& plot : m.plots) {
        DtbResult r = dtb(plot.shape, index);
        rep.per_plot[plot.id] = r.plot_dtb;
        for (size_t e = 0; e < r.per_edge.size(); ++e) rep.per_edge[{plot.id, e}] = r.per_edge[e];
    }
    return rep;
}

}  // namespace matchfit
