#pragma once

#include <matchfit/errors.hpp>
#include <matchfit/jitterfit.hpp>
#include <matchfit/tps.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace matchfit {

struct SplineFitConfig {
    double anchor_dtb_max = 2.5;     // m; candidate cutoff for anchors
    int k_anchors = 12;
    double epsilon_m = 15.0;         // warp's distance-to-identity bound
    double tps_lambda = 1e-6;
    double area_bound_frac = 0.03;   // per-plot area distortion cap
    double shape_bound_coeff = 0.03; // Hausdorff cap = coeff * sqrt(area)
};

/// Per-plot refit output of SplineFit step 1.
struct PlotRefit {
    SurveyPlot plot;   // refitted geometry
    double dtb = 0.0;  // dtb of the refitted geometry
};

using RefitMap = std::map<std::string, PlotRefit>;

struct AnchorSet {
    std::set<std::string> indices;
    std::map<std::string, double> candidate_scores;  // plot-id -> post-refit dtb
    bool fewer_than_requested = false;
};

struct WarpField {
    std::vector<std::pair<Point2D, Point2D>> control_points;  // (point, displacement)
    enum class Kernel { ThinPlate } kernel = Kernel::ThinPlate;
    double epsilon = 15.0;
    double regularization = 1e-6;
    double gain = 1.0;  // global damping applied by the distortion guard
    ThinPlateSpline spline;

    /// Warped position; displacement clamped in norm to epsilon.
    Point2D operator()(Point2D x) const {
        Point2D d = gain * spline.displacement(x);
        const double n = norm(d);
        if (n > epsilon) d = (epsilon / n) * d;
        return x + d;
    }
};

/// Step 1 of SplineFit: unhook every plot and JitterFit it against F on dtb.
inline RefitMap refit_all_plots(const SurveyMap& m1, const FarmSet& f,
                                const JitterOptions& opts = plot_jitter_defaults()) {
    FarmIndex index(f);
    RefitMap out;
    for (const auto& q : m1.plots) {
        auto [fit, refitted] = jitterfit_plot(q, index, opts);
        out[q.id] = {refitted, fit.objective_after};
    }
    return out;
}

/// Greedy k-center over plot centroids, restricted to well-fitting candidates,
/// seeded by the lowest-dtb plot.
inline AnchorSet select_anchors(const SurveyMap& m1, const RefitMap& refit, int k,
                                double anchor_dtb_max = 2.5) {
    if (k < 3) throw ConfigError("select_anchors: k must be >= 3");
    struct Cand {
        std::string id;
        Point2D c;
        double dtb;
        std::vector<std::pair<long long, long long>> vertex_keys;
    };
    std::vector<Cand> cands;
    for (const auto& q : m1.plots) {
        auto it = refit.find(q.id);
        if (it == refit.end()) continue;
        if (it->second.dtb <= anchor_dtb_max) {
            Cand c{q.id, centroid(q.shape), it->second.dtb, {}};
            for (const Point2D& v : q.shape.exterior)
                c.vertex_keys.emplace_back(llround(v.x * 1e6), llround(v.y * 1e6));
            cands.push_back(std::move(c));
        }
    }
    if (cands.empty()) throw NoAnchors("select_anchors: no plot has dtb <= threshold");

    AnchorSet a;
    for (const auto& c : cands) a.candidate_scores[c.id] = c.dtb;
    if (static_cast<int>(cands.size()) <= k) {
        for (const auto& c : cands) a.indices.insert(c.id);
        a.fewer_than_requested = static_cast<int>(cands.size()) < k;
        return a;
    }

    std::vector<size_t> chosen;
    size_t seed = 0;
    for (size_t i = 1; i < cands.size(); ++i) {
        if (cands[i].dtb < cands[seed].dtb ||
            (cands[i].dtb == cands[seed].dtb && cands[i].id < cands[seed].id))
            seed = i;
    }
    chosen.push_back(seed);
    // Anchors must not share welded vertices: two rigid per-plot refits give a
    // shared vertex two different targets, and no interpolating warp can fix
    // both. k-center spread makes the exclusion cheap.
    std::set<std::pair<long long, long long>> used_vertices(cands[seed].vertex_keys.begin(),
                                                            cands[seed].vertex_keys.end());
    std::vector<double> min_dist(cands.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(chosen.size()) < k) {
        for (size_t i = 0; i < cands.size(); ++i)
            min_dist[i] = std::min(min_dist[i], distance(cands[i].c, cands[chosen.back()].c));
        size_t best = 0;
        double best_d = -1.0;
        for (size_t i = 0; i < cands.size(); ++i) {
            if (min_dist[i] <= 0.0) continue;
            bool touches = false;
            for (const auto& key : cands[i].vertex_keys)
                if (used_vertices.count(key)) touches = true;
            if (touches) continue;
            if (min_dist[i] > best_d) {
                best_d = min_dist[i];
                best = i;
            }
        }
        if (best_d <= 0.0) break;  // nothing left that is disjoint from the chosen set
        chosen.push_back(best);
        used_vertices.insert(cands[best].vertex_keys.begin(), cands[best].vertex_keys.end());
    }
    if (static_cast<int>(chosen.size()) < k) a.fewer_than_requested = true;
    for (size_t i : chosen) a.indices.insert(cands[i].id);
    return a;
}

/// Interpolating warp whose control points are the anchor plots' M1 vertices,
/// displaced to their refitted positions (norm-clamped to epsilon).
inline WarpField fit_warp(const SurveyMap& m1, const AnchorSet& anchors, const RefitMap& refit,
                          double epsilon, double lambda = 1e-6) {
    if (anchors.indices.empty()) throw NoAnchors("fit_warp: empty anchor set");
    WarpField w;
    w.epsilon = epsilon;
    w.regularization = lambda;

    // Weld coincident control points, averaging their displacements.
    std::map<std::pair<long long, long long>, std::pair<Point2D, std::vector<Point2D>>> welded;
    for (const auto& q : m1.plots) {
        if (!anchors.indices.count(q.id)) continue;
        const auto& target = refit.at(q.id).plot.shape;
        for (size_t i = 0; i < q.shape.exterior.size(); ++i) {
            const Point2D src = q.shape.exterior[i];
            Point2D d = target.exterior[i] - src;
            const double n = norm(d);
            if (n > epsilon) d = (epsilon / n) * d;
            const auto key = std::make_pair(llround(src.x * 1e6), llround(src.y * 1e6));
            auto& slot = welded[key];
            slot.first = src;
            slot.second.push_back(d);
        }
    }
    std::vector<Point2D> pts, disp;
    for (const auto& [key, slot] : welded) {
        Point2D avg{0.0, 0.0};
        for (const Point2D& d : slot.second) avg = avg + d;
        avg = (1.0 / slot.second.size()) * avg;
        pts.push_back(slot.first);
        disp.push_back(avg);
        w.control_points.emplace_back(slot.first, avg);
    }
    w.spline = ThinPlateSpline(pts, disp, lambda);
    return w;
}

/// Symmetric Hausdorff distance between exteriors after centroid alignment.
inline double shape_deviation(const Polygon& a, const Polygon& b) {
    const Point2D shift = centroid(a) - centroid(b);
    auto sample = [](const Ring& r, double spacing) {
        std::vector<Point2D> pts;
        const size_t n = r.size();
        for (size_t i = 0; i < n; ++i) {
            const Point2D u = r[i], v = r[(i + 1) % n];
            const double len = distance(u, v);
            const int steps = std::max(1, static_cast<int>(len / spacing));
            for (int k = 0; k < steps; ++k) pts.push_back(u + (static_cast<double>(k) / steps) * (v - u));
        }
        return pts;
    };
    auto directed = [](const std::vector<Point2D>& pts, const Ring& ring) {
        double worst = 0.0;
        const size_t n = ring.size();
        for (const Point2D& p : pts) {
            double best = std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < n; ++i)
                best = std::min(best, point_segment_distance(p, ring[i], ring[(i + 1) % n]));
            worst = std::max(worst, best);
        }
        return worst;
    };
    Ring b_shifted = b.exterior;
    for (Point2D& p : b_shifted) p = p + shift;
    const double spacing = std::max(0.5, perimeter(a) / 256.0);
    return std::max(directed(sample(a.exterior, spacing), b_shifted),
                    directed(sample(b_shifted, spacing), a.exterior));
}

struct WarpApplyResult {
    SurveyMap map;          // stage M2
    double gain = 1.0;      // final damping factor (1.0 when no damping was needed)
    int damping_rounds = 0;
};

/// Apply the warp, then enforce the 3% area bound and the shape bound,
/// geometrically damping the displacements when violated.
inline WarpApplyResult apply_warp(const SurveyMap& m1, WarpField w,
                                  const SplineFitConfig& cfg = {}) {
    WarpApplyResult res;
    for (int round = 0; round <= 10; ++round) {
        SurveyMap m2 = m1;
        m2.stage = MapStage::M2;
        for (auto& plot : m2.plots) {
            for (Point2D& v : plot.shape.exterior) v = w(v);
            for (Ring& h : plot.shape.holes)
                for (Point2D& v : h) v = w(v);
        }
        std::string worst_id;
        double worst_excess = 0.0;
        for (size_t i = 0; i < m2.plots.size(); ++i) {
            const double a1 = area(m1.plots[i].shape);
            const double a2 = area(m2.plots[i].shape);
            const double area_frac = std::abs(a2 - a1) / a1;
            const double shape_dev = shape_deviation(m1.plots[i].shape, m2.plots[i].shape);
            const double shape_cap = cfg.shape_bound_coeff * std::sqrt(a1);
            const double viol = std::max(area_frac - cfg.area_bound_frac, shape_dev - shape_cap);
            if (viol > worst_excess) {
                worst_excess = viol;
                worst_id = m2.plots[i].id;
            }
        }
        if (worst_excess <= 0.0) {
            res.map = std::move(m2);
            res.gain = w.gain;
            res.damping_rounds = round;
            return res;
        }
        if (round == 10) throw DistortionBound("apply_warp: distortion bound not met after damping; worst plot " + worst_id);
        w.gain *= 0.8;
    }
    throw DistortionBound("apply_warp: unreachable");
}

}  // namespace matchfit
