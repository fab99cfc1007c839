#pragma once

#include <matchfit/errors.hpp>
#include <matchfit/metrics.hpp>
#include <matchfit/transform.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

namespace matchfit {

struct SearchBounds {
    double txy_max = 100.0;   // |tx|, |ty| <= txy_max (m); hard cap 2000
    double theta_max = 0.35;  // rad
    double s_min = 0.8;
    double s_max = 1.25;
};

struct JitterOptions {
    SearchBounds bounds;
    int grid_steps_txy = 9;
    int grid_steps_theta = 7;
    int grid_steps_s = 7;
    int zoom_rounds = 4;
    int refine_starts = 5;     // Nelder-Mead restarts from the best grid cells
    int nm_max_iter = 150;
    std::uint64_t seed = 0;    // reserved; the search itself is deterministic
};

struct FitResult {
    SimilarityTransform transform;
    double objective_before = 0.0;
    double objective_after = 0.0;
    std::int64_t evaluations = 0;
};

namespace detail {

using Params = std::array<double, 4>;  // tx, ty, theta, s

inline SimilarityTransform to_transform(const Params& p) { return {p[0], p[1], p[2], p[3]}; }

/// Search value for transforms that remove all overlap with the farm set.
/// ea is 0 on disjoint inputs, so without this the optimizer could zero the
/// objective by pushing the map off the farms entirely.
constexpr double kNoOverlap = 1e30;

class MemoizedObjective {
public:
    /// fn returns (objective, farm-coverage area) for a transform.
    MemoizedObjective(std::function<std::pair<double, double>(const SimilarityTransform&)> fn,
                      SearchBounds b)
        : fn_(std::move(fn)), bounds_(b) {}

    /// Search value: the objective plus a vanishing displacement penalty that
    /// breaks ties on zero-objective plateaus toward the smaller transform.
    double operator()(Params p) {
        clamp(p);
        const auto [val, coverage] = evaluate(p);
        if (coverage < coverage_floor_) return kNoOverlap;
        const double nx = p[0] / std::max(bounds_.txy_max, 1.0);
        const double ny = p[1] / std::max(bounds_.txy_max, 1.0);
        const double nt = p[2] / std::max(bounds_.theta_max, 1e-6);
        const double ns = (p[3] - 1.0) / std::max(bounds_.s_max - bounds_.s_min, 1e-6);
        return val + 1e-9 * (nx * nx + ny * ny + nt * nt + ns * ns);
    }

    /// The objective itself, unpenalized, for reporting.
    double pure(Params p) {
        clamp(p);
        return evaluate(p).first;
    }

    double coverage_at(Params p) {
        clamp(p);
        return evaluate(p).second;
    }

    /// Transforms must keep at least this much farm overlap. A tiny absolute
    /// floor is not enough: a plot grazing the farm set with a 1e-6 m^2 sliver
    /// has near-zero ea, so the floor is set from the overlap at identity.
    void set_coverage_floor(double floor) {
        coverage_floor_ = std::max(floor, kMinIntersectionArea);
    }

    void clamp(Params& p) const {
        p[0] = std::clamp(p[0], -bounds_.txy_max, bounds_.txy_max);
        p[1] = std::clamp(p[1], -bounds_.txy_max, bounds_.txy_max);
        p[2] = std::clamp(p[2], -bounds_.theta_max, bounds_.theta_max);
        p[3] = std::clamp(p[3], bounds_.s_min, bounds_.s_max);
    }

    std::int64_t evaluations() const { return evals_; }

private:
    std::pair<double, double> evaluate(const Params& p) {
        // Quantize to suppress duplicate overlays from near-identical proposals.
        const std::int64_t qx = llround(p[0] * 1e5), qy = llround(p[1] * 1e5);
        const std::int64_t qt = llround(p[2] * 1e7), qs = llround(p[3] * 1e8);
        std::uint64_t key = 1469598103934665603ull;
        for (std::int64_t v : {qx, qy, qt, qs}) {
            key ^= static_cast<std::uint64_t>(v);
            key *= 1099511628211ull;
        }
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const std::pair<double, double> val = fn_(to_transform(p));
        ++evals_;
        cache_.emplace(key, val);
        return val;
    }

    std::function<std::pair<double, double>(const SimilarityTransform&)> fn_;
    SearchBounds bounds_;
    double coverage_floor_ = kMinIntersectionArea;
    std::unordered_map<std::uint64_t, std::pair<double, double>> cache_;
    std::int64_t evals_ = 0;
};

/// Standard Nelder-Mead on the 4 parameters, coordinates scaled per-axis.
inline std::pair<Params, double> nelder_mead(MemoizedObjective& obj, Params start,
                                             const Params& scale, int max_iter,
                                             double span_tol = 1e-5) {
    constexpr int n = 4;
    std::vector<std::pair<Params, double>> simplex;
    simplex.reserve(n + 1);
    simplex.emplace_back(start, obj(start));
    for (int i = 0; i < n; ++i) {
        Params p = start;
        p[i] += scale[i];
        simplex.emplace_back(p, obj(p));
    }
    auto order = [&] {
        std::sort(simplex.begin(), simplex.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
    };
    order();
    for (int it = 0; it < max_iter; ++it) {
        Params cen{};
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < n; ++d) cen[d] += simplex[i].first[d];
        }
        for (int d = 0; d < n; ++d) cen[d] /= n;
        const auto& worst = simplex[n];
        auto blend = [&](double t) {
            Params p;
            for (int d = 0; d < n; ++d) p[d] = cen[d] + t * (cen[d] - worst.first[d]);
            return p;
        };
        Params refl = blend(1.0);
        double f_refl = obj(refl);
        if (f_refl < simplex[0].second) {
            Params exp = blend(2.0);
            double f_exp = obj(exp);
            simplex[n] = f_exp < f_refl ? std::make_pair(exp, f_exp) : std::make_pair(refl, f_refl);
        } else if (f_refl < simplex[n - 1].second) {
            simplex[n] = {refl, f_refl};
        } else {
            Params con = blend(f_refl < worst.second ? 0.5 : -0.5);
            double f_con = obj(con);
            if (f_con < std::min(f_refl, worst.second)) {
                simplex[n] = {con, f_con};
            } else {
                for (int i = 1; i <= n; ++i) {
                    Params p;
                    for (int d = 0; d < n; ++d)
                        p[d] = simplex[0].first[d] + 0.5 * (simplex[i].first[d] - simplex[0].first[d]);
                    simplex[i] = {p, obj(p)};
                }
            }
        }
        order();
        // Converged when the simplex spans less than the memoization quantum.
        double span = 0.0;
        for (int i = 1; i <= n; ++i)
            for (int d = 0; d < n; ++d)
                span = std::max(span, std::abs(simplex[i].first[d] - simplex[0].first[d]) / scale[d]);
        if (span < span_tol) break;
    }
    return simplex[0];
}

/// Coarse multi-resolution grid, then Nelder-Mead from the best cells.
inline FitResult minimize_similarity(MemoizedObjective& obj, const JitterOptions& opts) {
    const SearchBounds& b = opts.bounds;
    struct Cell {
        Params p;
        double f;
    };
    std::vector<Cell> best_cells;
    std::vector<Cell> pool;  // every cell from every round, for diverse restarts

    Params center{0.0, 0.0, 0.0, std::clamp(1.0, b.s_min, b.s_max)};
    Params half{b.txy_max, b.txy_max, b.theta_max, (b.s_max - b.s_min) / 2.0};
    const Params coarse_step{
        2.0 * half[0] / std::max(opts.grid_steps_txy - 1, 1),
        2.0 * half[1] / std::max(opts.grid_steps_txy - 1, 1),
        2.0 * half[2] / std::max(opts.grid_steps_theta - 1, 1),
        2.0 * half[3] / std::max(opts.grid_steps_s - 1, 1)};

    obj.set_coverage_floor(0.5 * obj.coverage_at(center));

    auto linspace = [](double c, double h, int steps) {
        std::vector<double> v;
        if (steps <= 1 || h == 0.0) {
            v.push_back(c);
            return v;
        }
        for (int i = 0; i < steps; ++i) v.push_back(c - h + 2.0 * h * i / (steps - 1));
        return v;
    };

    for (int round = 0; round < opts.zoom_rounds; ++round) {
        std::vector<Cell> cells;
        for (double tx : linspace(center[0], half[0], opts.grid_steps_txy))
            for (double ty : linspace(center[1], half[1], opts.grid_steps_txy))
                for (double th : linspace(center[2], half[2], opts.grid_steps_theta))
                    for (double s : linspace(center[3], half[3], opts.grid_steps_s)) {
                        Params p{tx, ty, th, s};
                        cells.push_back({p, obj(p)});
                    }
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& c) {
            return a.f != c.f ? a.f < c.f : a.p < c.p;
        });
        pool.insert(pool.end(), cells.begin(), cells.end());
        best_cells = cells;
        center = cells[0].p;
        obj.clamp(center);
        // Shrink to ~1.5 grid steps around the winner.
        for (int d = 0; d < 4; ++d) {
            const int steps = d < 2 ? opts.grid_steps_txy : (d == 2 ? opts.grid_steps_theta : opts.grid_steps_s);
            half[d] = steps > 1 ? 1.5 * (2.0 * half[d] / (steps - 1)) : 0.0;
        }
    }

    const Params scale{std::max(half[0], 0.05), std::max(half[1], 0.05),
                       std::max(half[2], 1e-4), std::max(half[3], 1e-4)};
    std::vector<Params> candidates;
    const int starts = std::min<int>(opts.refine_starts, static_cast<int>(best_cells.size()));
    for (int k = 0; k < starts; ++k)
        candidates.push_back(nelder_mead(obj, best_cells[k].p, scale, opts.nm_max_iter, 1e-3).first);

    // The zoom is greedy: every round recenters on one winner, so all the fine
    // starts above can sit in a single basin. Restart from the best cells of
    // ALL rounds, kept pairwise at least one coarse grid step apart, with a
    // coarse simplex that can walk between basins.
    std::sort(pool.begin(), pool.end(), [](const Cell& a, const Cell& c) {
        return a.f != c.f ? a.f < c.f : a.p < c.p;
    });
    std::vector<Params> diverse;
    for (const Cell& cell : pool) {
        if (static_cast<int>(diverse.size()) >= opts.refine_starts) break;
        bool distinct = true;
        for (const Params& d : diverse) {
            bool near = true;
            for (int dim = 0; dim < 4; ++dim)
                if (std::abs(cell.p[dim] - d[dim]) > coarse_step[dim]) near = false;
            if (near) distinct = false;
        }
        if (distinct) diverse.push_back(cell.p);
    }
    const Params coarse_scale{std::max(coarse_step[0], 0.05), std::max(coarse_step[1], 0.05),
                              std::max(coarse_step[2], 1e-4), std::max(coarse_step[3], 1e-4)};
    for (const Params& start : diverse)
        candidates.push_back(nelder_mead(obj, start, coarse_scale, opts.nm_max_iter, 1e-3).first);

    Params ident{0.0, 0.0, 0.0, 1.0};
    obj.clamp(ident);

    // Ties go to the smallest transform, so the basins nearest the identity
    // must be explored even when their grid cells score poorly.
    for (const Params& start :
         {ident, Params{ident[0] - coarse_step[0], ident[1], ident[2], ident[3]},
          Params{ident[0] + coarse_step[0], ident[1], ident[2], ident[3]},
          Params{ident[0], ident[1] - coarse_step[1], ident[2], ident[3]},
          Params{ident[0], ident[1] + coarse_step[1], ident[2], ident[3]}})
        candidates.push_back(nelder_mead(obj, start, coarse_scale, opts.nm_max_iter, 1e-3).first);
    const double f_ident = obj.pure(ident);
    candidates.push_back(ident);

    // NM stops well above the objective's true floor (the convergence span is
    // relative to the simplex scale), so near-ties between distinct basins are
    // decided by termination noise. Polish every candidate with a small
    // simplex, then pick by objective with a near-tie preference for the
    // smallest transform.
    const Params polish_scale{0.02, 0.02, 5e-5, 5e-5};
    struct Candidate {
        Params p;
        double f;
        double norm2;
    };
    std::vector<Candidate> polished;
    // Dedupe converged candidates before the (comparatively pricey) polish.
    std::vector<Params> unique_candidates;
    for (const Params& c : candidates) {
        bool dup = false;
        for (const Params& u : unique_candidates) {
            if (std::abs(c[0] - u[0]) < 0.05 && std::abs(c[1] - u[1]) < 0.05 &&
                std::abs(c[2] - u[2]) < 1e-4 && std::abs(c[3] - u[3]) < 1e-4)
                dup = true;
        }
        if (!dup) unique_candidates.push_back(c);
    }
    for (const Params& c : unique_candidates) {
        Params p = nelder_mead(obj, c, polish_scale, opts.nm_max_iter).first;
        obj.clamp(p);
        const double f = obj.pure(p);
        if (f >= kNoOverlap) continue;
        const double nx = p[0] / std::max(b.txy_max, 1.0);
        const double ny = p[1] / std::max(b.txy_max, 1.0);
        const double nt = p[2] / std::max(b.theta_max, 1e-6);
        const double ns = (p[3] - 1.0) / std::max(b.s_max - b.s_min, 1e-6);
        polished.push_back({p, f, nx * nx + ny * ny + nt * nt + ns * ns});
    }

    Params best_p = ident;
    double best_f = f_ident;
    if (!polished.empty()) {
        double f_min = polished[0].f;
        for (const Candidate& c : polished) f_min = std::min(f_min, c.f);
        const double tie_tol = 1e-4 * std::max(f_ident, 1e-6);
        const Candidate* pick = nullptr;
        for (const Candidate& c : polished) {
            if (c.f > f_min + tie_tol) continue;
            if (!pick || c.norm2 < pick->norm2 || (c.norm2 == pick->norm2 && c.p < pick->p))
                pick = &c;
        }
        // Never return worse than the identity; when nothing in the search box
        // overlaps the farms at all, the identity is the only honest answer.
        if (pick && pick->f <= f_ident) {
            best_p = pick->p;
            best_f = pick->f;
        }
    }

    FitResult r;
    r.transform = to_transform(best_p);
    r.objective_before = f_ident;
    r.objective_after = best_f;
    r.evaluations = obj.evaluations();
    return r;
}

}  // namespace detail

/// Map-level JitterFit: minimize ea(M^t, F) over similarity transforms.
inline std::pair<FitResult, SurveyMap> jitterfit_map(const SurveyMap& m0, const FarmSet& f,
                                                     const JitterOptions& opts = {}) {
    if (m0.plots.empty()) throw EmptyInput("jitterfit_map: empty survey map");
    if (f.plots.empty()) throw EmptyInput("jitterfit_map: empty farm set");

    FarmIndex index(f);
    const Point2D pivot = bounds(m0).center();
    detail::MemoizedObjective obj(
        [&](const SimilarityTransform& t) {
            double total = 0.0, coverage = 0.0;
            for (const auto& plot : m0.plots)
                total += excess_area_plot(apply(t, plot.shape, pivot), index, &coverage);
            return std::make_pair(total, coverage);
        },
        opts.bounds);

    FitResult r = detail::minimize_similarity(obj, opts);
    SurveyMap m1 = apply_transform(m0, r.transform);
    m1.stage = MapStage::M1;
    return {r, m1};
}

inline JitterOptions plot_jitter_defaults() {
    JitterOptions o;
    o.bounds.txy_max = 30.0;
    o.bounds.theta_max = 5.0 * M_PI / 180.0;
    // Area scales with s^2, so +-1% scale keeps the implied area change
    // near 2%, inside the 3% distortion budget downstream stages enforce.
    o.bounds.s_min = 0.99;
    o.bounds.s_max = 1.01;
    o.grid_steps_txy = 7;
    o.grid_steps_theta = 5;
    o.grid_steps_s = 3;
    o.zoom_rounds = 3;
    o.refine_starts = 3;
    return o;
}

/// Per-plot JitterFit: minimize dtb(Q^t, F) about the plot centroid.
inline std::pair<FitResult, SurveyPlot> jitterfit_plot(const SurveyPlot& q, const FarmIndex& index,
                                                       const JitterOptions& opts = plot_jitter_defaults()) {
    const Point2D pivot = centroid(q.shape);
    detail::MemoizedObjective obj(
        [&](const SimilarityTransform& t) {
            const Polygon shape = apply(t, q.shape, pivot);
            double coverage = 0.0;
            const double ea = excess_area_plot(shape, index, &coverage);
            return std::make_pair(ea / perimeter(shape), coverage);
        },
        opts.bounds);
    FitResult r = detail::minimize_similarity(obj, opts);
    SurveyPlot out = q;
    out.shape = apply(r.transform, q.shape, pivot);
    return {r, out};
}

inline std::pair<FitResult, SurveyPlot> jitterfit_plot(const SurveyPlot& q, const FarmSet& f,
                                                       const JitterOptions& opts = plot_jitter_defaults()) {
    FarmIndex index(f);
    return jitterfit_plot(q, index, opts);
}

}  // namespace matchfit
