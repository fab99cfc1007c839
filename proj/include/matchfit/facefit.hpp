#pragma once

#include <matchfit/errors.hpp>
#include <matchfit/metrics.hpp>
#include <matchfit/splinefit.hpp>  // shape_deviation

#include <boost/polygon/voronoi.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace matchfit {

struct FarmPartitionConfig {
    double sample_spacing = 1.0;   // m between boundary samples fed to the Voronoi builder
    double sample_inset = 0.01;    // m; samples pulled inside their farm so that
                                   // farms sharing an edge keep distinct sample points
    double corner_angle_min_deg = 30.0;
    double node_merge_tol = 1.0;   // m; junction nodes closer than this are merged
};

struct FarmPartition {
    std::map<std::string, Polygon> cells;           // farm-id -> Voronoi cell
    std::vector<Point2D> graph_nodes;               // junction points of the partition
    std::vector<std::pair<size_t, size_t>> graph_edges;
    BoundingBox bbox;
};

struct CornerVertex {
    std::string plot_id;
    size_t vertex_index = 0;
    Point2D position;
    bool fixed = false;
};

struct SnapResult {
    std::string plot_id;
    std::map<size_t, size_t> mapping;  // vertex-index -> graph-node index
    double ea_before = 0.0;
    double ea_after = 0.0;
    double area_change_frac = 0.0;
};

struct FaceFitConfig {
    double corner_angle_min_deg = 30.0;
    double snap_radius_m = 20.0;
    int beam_width = 64;
    int candidates_per_corner = 6;
    double area_bound_frac = 0.03;
    double shape_bound_coeff = 0.03;
    double weld_tol = 1e-3;  // m; vertices closer than this are the same point
};

namespace detail {

/// Interior-angle deviation from straight (180 deg), in degrees, at vertex i.
inline double corner_deviation_deg(const Ring& r, size_t i) {
    const size_t n = r.size();
    const Point2D u = r[(i + n - 1) % n] - r[i];
    const Point2D w = r[(i + 1) % n] - r[i];
    const double nu = norm(u), nw = norm(w);
    if (nu == 0.0 || nw == 0.0) return 0.0;
    const double c = std::clamp(dot(u, w) / (nu * nw), -1.0, 1.0);
    const double angle = std::acos(c) * 180.0 / M_PI;  // 180 for a straight-through vertex
    return std::abs(180.0 - angle);
}

struct VoronoiInput {
    std::vector<boost::polygon::point_data<int>> points;
    std::vector<size_t> farm_of_point;
    double scale = 1000.0;  // mm resolution
};

inline VoronoiInput sample_farm_boundaries(const FarmSet& f, double spacing, double inset) {
    VoronoiInput in;
    for (size_t fi = 0; fi < f.plots.size(); ++fi) {
        const Ring& r = f.plots[fi].shape.exterior;
        const size_t n = r.size();
        for (size_t i = 0; i < n; ++i) {
            const Point2D a = r[i], b = r[(i + 1) % n];
            const double len = distance(a, b);
            if (len == 0.0) continue;
            // Inward normal of a CCW exterior edge (interior lies to its left).
            const Point2D nrm = (inset / len) * Point2D{-(b.y - a.y), b.x - a.x};
            const int steps = std::max(1, static_cast<int>(std::ceil(len / spacing)));
            for (int k = 0; k < steps; ++k) {
                const Point2D p = a + (static_cast<double>(k) / steps) * (b - a) + nrm;
                in.points.emplace_back(static_cast<int>(std::llround(p.x * in.scale)),
                                       static_cast<int>(std::llround(p.y * in.scale)));
                in.farm_of_point.push_back(fi);
            }
        }
    }
    return in;
}

inline Polygon bbox_polygon(const BoundingBox& b) {
    return make_polygon({{b.min_x, b.min_y}, {b.max_x, b.min_y}, {b.max_x, b.max_y}, {b.min_x, b.max_y}});
}

/// Clip a convex ring to the half-plane dot(x - mid, n) <= 0 (Sutherland-Hodgman).
inline Ring clip_halfplane(const Ring& r, Point2D mid, Point2D n) {
    Ring out;
    const size_t m = r.size();
    for (size_t i = 0; i < m; ++i) {
        const Point2D a = r[i], b = r[(i + 1) % m];
        const double da = dot(a - mid, n), db = dot(b - mid, n);
        if (da <= 0.0) out.push_back(a);
        if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0))
            out.push_back(a + (da / (da - db)) * (b - a));
    }
    return out;
}

}  // namespace detail

inline std::vector<CornerVertex> detect_corners(const SurveyPlot& q, double corner_angle_min_deg = 30.0) {
    std::vector<CornerVertex> out;
    const Ring& r = q.shape.exterior;
    for (size_t i = 0; i < r.size(); ++i) {
        if (detail::corner_deviation_deg(r, i) >= corner_angle_min_deg)
            out.push_back({q.id, i, r[i], false});
    }
    return out;
}

/// Generalized Voronoi of the farm polygons, approximated by dense boundary
/// sampling: every sample point gets a point-Voronoi cell, cells are unioned
/// per farm, and partition junctions become graph nodes.
inline FarmPartition build_farm_partition(const FarmSet& f, const BoundingBox& bbox,
                                          const FarmPartitionConfig& cfg = {}) {
    if (f.plots.size() < 2) throw TooFewSites("build_farm_partition: need at least 2 farm plots");

    detail::VoronoiInput in = detail::sample_farm_boundaries(f, cfg.sample_spacing, cfg.sample_inset);
    boost::polygon::voronoi_diagram<double> vd;
    boost::polygon::construct_voronoi(in.points.begin(), in.points.end(), &vd);

    FarmPartition part;
    part.bbox = bbox;
    const double inv = 1.0 / in.scale;
    const Polygon clip = detail::bbox_polygon(bbox);

    auto site_point = [&](const boost::polygon::voronoi_diagram<double>::cell_type& cell) {
        const auto& p = in.points[cell.source_index()];
        return Point2D{p.x() * inv, p.y() * inv};
    };

    // Per-sample-point cell: the bbox clipped by the perpendicular bisector
    // toward every Voronoi neighbor of the sample. Convex by construction, so
    // no infinite-edge ring reconstruction is needed. Cells union per farm.
    std::vector<std::vector<MultiPolygon>> farm_pieces(f.plots.size());
    for (const auto& cell : vd.cells()) {
        const Point2D own = site_point(cell);
        Ring ring = clip.exterior;
        const auto* edge = cell.incident_edge();
        const auto* e = edge;
        do {
            const Point2D nbr = site_point(*e->twin()->cell());
            const Point2D n = nbr - own;
            if (norm(n) > 0.0) ring = detail::clip_halfplane(ring, 0.5 * (own + nbr), n);
            e = e->next();
        } while (e != edge && ring.size() >= 3);
        if (ring.size() < 3) continue;
        Polygon cell_poly;
        try {
            cell_poly = make_polygon(std::move(ring));
        } catch (const DegenerateGeometry&) {
            continue;
        }
        // Inflate a hair so neighboring sample cells overlap rather than touch
        // exactly; unions of exactly-collinear shared edges are fragile.
        const Point2D cc = centroid(cell_poly);
        for (Point2D& v : cell_poly.exterior) v = cc + (1.0 + 1e-7) * (v - cc);
        farm_pieces[in.farm_of_point[cell.source_index()]].push_back(MultiPolygon{{std::move(cell_poly)}});
    }

    for (size_t fi = 0; fi < f.plots.size(); ++fi) {
        if (farm_pieces[fi].empty()) continue;
        MultiPolygon merged = union_all(std::move(farm_pieces[fi]));
        if (merged.parts.empty()) continue;
        // Keep the largest part; slivers can split off at the bbox fringe.
        size_t best = 0;
        for (size_t k = 1; k < merged.parts.size(); ++k)
            if (area(merged.parts[k]) > area(merged.parts[best])) best = k;
        part.cells[f.plots[fi].id] = std::move(merged.parts[best]);
    }

    // Junction nodes: Voronoi vertices whose incident cells span >= 3 farms.
    std::vector<Point2D> raw_nodes;
    for (const auto& v : vd.vertices()) {
        std::set<size_t> farms;
        const auto* edge = v.incident_edge();
        const auto* e = edge;
        do {
            farms.insert(in.farm_of_point[e->cell()->source_index()]);
            e = e->rot_next();
        } while (e != edge);
        if (farms.size() >= 3) raw_nodes.push_back({v.x() * inv, v.y() * inv});
    }
    // Farm corner points projected onto their own cell boundary.
    for (size_t fi = 0; fi < f.plots.size(); ++fi) {
        auto it = part.cells.find(f.plots[fi].id);
        if (it == part.cells.end()) continue;
        const Ring& cell_ring = it->second.exterior;
        const Ring& r = f.plots[fi].shape.exterior;
        for (size_t i = 0; i < r.size(); ++i) {
            if (detail::corner_deviation_deg(r, i) < cfg.corner_angle_min_deg) continue;
            Point2D best = cell_ring[0];
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t k = 0; k < cell_ring.size(); ++k) {
                const Point2D cand = project_on_segment(r[i], cell_ring[k], cell_ring[(k + 1) % cell_ring.size()]);
                const double d = distance(r[i], cand);
                if (d < best_d) {
                    best_d = d;
                    best = cand;
                }
            }
            raw_nodes.push_back(best);
        }
    }
    // Merge nearby nodes (deterministic first-come ordering).
    for (const Point2D& p : raw_nodes) {
        if (!bbox.contains(p)) continue;
        bool merged = false;
        for (const Point2D& q : part.graph_nodes) {
            if (distance(p, q) < cfg.node_merge_tol) {
                merged = true;
                break;
            }
        }
        if (!merged) part.graph_nodes.push_back(p);
    }

    // Boundary edges between junction nodes: walk chains of Voronoi edges that
    // separate cells of different farms.
    auto node_at = [&](Point2D p) -> std::optional<size_t> {
        for (size_t i = 0; i < part.graph_nodes.size(); ++i)
            if (distance(p, part.graph_nodes[i]) < cfg.node_merge_tol) return i;
        return std::nullopt;
    };
    std::map<std::pair<long long, long long>, std::vector<Point2D>> adj;
    auto key_of = [&](Point2D p) {
        return std::make_pair(std::llround(p.x * in.scale), std::llround(p.y * in.scale));
    };
    for (const auto& e : vd.edges()) {
        if (!e.is_primary() || !e.is_finite()) continue;
        if (in.farm_of_point[e.cell()->source_index()] ==
            in.farm_of_point[e.twin()->cell()->source_index()])
            continue;
        const Point2D a{e.vertex0()->x() * inv, e.vertex0()->y() * inv};
        const Point2D b{e.vertex1()->x() * inv, e.vertex1()->y() * inv};
        adj[key_of(a)].push_back(b);
    }
    std::set<std::pair<size_t, size_t>> edge_set;
    for (const auto& [akey, nbrs] : adj) {
        const Point2D a{akey.first * inv, akey.second * inv};
        auto a_node = node_at(a);
        if (!a_node) continue;
        for (Point2D cur : nbrs) {
            Point2D prev = a;
            // Follow the chain until the next junction (bounded walk).
            for (int hops = 0; hops < 100000; ++hops) {
                auto n = node_at(cur);
                if (n) {
                    if (*n != *a_node)
                        edge_set.insert({std::min(*a_node, *n), std::max(*a_node, *n)});
                    break;
                }
                auto it = adj.find(key_of(cur));
                if (it == adj.end()) break;
                bool advanced = false;
                for (const Point2D& nxt : it->second) {
                    if (distance(nxt, prev) > 1e-9) {
                        prev = cur;
                        cur = nxt;
                        advanced = true;
                        break;
                    }
                }
                if (!advanced) break;
            }
        }
    }
    part.graph_edges.assign(edge_set.begin(), edge_set.end());
    return part;
}

namespace detail {

struct WeldedMap {
    std::vector<Point2D> positions;          // welded vertex positions (mutable state)
    std::vector<bool> fixed;                 // snapped vertices become fixed
    std::vector<std::vector<size_t>> plot_vertices;  // per plot: welded index per ring vertex
};

inline WeldedMap weld_vertices(const SurveyMap& m, double tol) {
    WeldedMap w;
    std::map<std::pair<long long, long long>, size_t> lookup;
    const double inv_tol = 1.0 / tol;
    w.plot_vertices.resize(m.plots.size());
    for (size_t pi = 0; pi < m.plots.size(); ++pi) {
        for (const Point2D& v : m.plots[pi].shape.exterior) {
            const auto key = std::make_pair(std::llround(v.x * inv_tol), std::llround(v.y * inv_tol));
            auto it = lookup.find(key);
            size_t idx;
            if (it == lookup.end()) {
                idx = w.positions.size();
                w.positions.push_back(v);
                w.fixed.push_back(false);
                lookup.emplace(key, idx);
            } else {
                idx = it->second;
            }
            w.plot_vertices[pi].push_back(idx);
        }
    }
    return w;
}

inline Polygon plot_shape(const WeldedMap& w, size_t pi) {
    Ring r;
    for (size_t idx : w.plot_vertices[pi]) r.push_back(w.positions[idx]);
    return make_polygon(std::move(r));
}

}  // namespace detail

/// Snap survey-plot corners onto farm-graph nodes, plot by plot in decreasing
/// initial excess-area order, under the 3% area constraint.
inline std::pair<SurveyMap, std::vector<SnapResult>> facefit_map(const SurveyMap& m,
                                                                 const FarmPartition& part,
                                                                 const FarmSet& f,
                                                                 const FaceFitConfig& cfg = {}) {
    FarmIndex index(f);
    detail::WeldedMap welded = detail::weld_vertices(m, cfg.weld_tol);

    std::vector<double> original_area(m.plots.size());
    std::vector<std::vector<size_t>> plots_of_vertex(welded.positions.size());
    for (size_t pi = 0; pi < m.plots.size(); ++pi) {
        original_area[pi] = area(m.plots[pi].shape);
        for (size_t idx : welded.plot_vertices[pi]) plots_of_vertex[idx].push_back(pi);
    }

    // Priority: decreasing initial ea, ties by plot id.
    std::vector<std::pair<double, size_t>> order;
    for (size_t pi = 0; pi < m.plots.size(); ++pi)
        order.emplace_back(excess_area_plot(m.plots[pi].shape, index), pi);
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return m.plots[a.second].id < m.plots[b.second].id;
    });

    std::vector<SnapResult> results;
    for (const auto& [initial_ea, pi] : order) {
        const SurveyPlot& plot = m.plots[pi];
        SnapResult res;
        res.plot_id = plot.id;

        const Polygon current = detail::plot_shape(welded, pi);
        res.ea_before = excess_area_plot(current, index);

        // Unfixed corner vertices, in ring order.
        std::vector<size_t> corners;
        for (size_t i = 0; i < current.exterior.size(); ++i) {
            if (detail::corner_deviation_deg(current.exterior, i) < cfg.corner_angle_min_deg) continue;
            if (welded.fixed[welded.plot_vertices[pi][i]]) continue;
            corners.push_back(i);
        }

        struct State {
            std::map<size_t, size_t> mapping;  // ring index -> node index
            double ea = 0.0;
            double displacement = 0.0;
            size_t node_index_sum = 0;
        };
        auto shape_with = [&](const std::map<size_t, size_t>& mapping) {
            Ring r = current.exterior;
            for (const auto& [vi, ni] : mapping) r[vi] = part.graph_nodes[ni];
            return make_polygon(std::move(r));
        };
        auto better = [](const State& a, const State& b) {
            if (a.ea != b.ea) return a.ea < b.ea;
            if (a.displacement != b.displacement) return a.displacement < b.displacement;
            return a.node_index_sum < b.node_index_sum;
        };

        std::vector<State> beam{State{{}, res.ea_before, 0.0, 0}};
        for (size_t ci : corners) {
            const Point2D pos = current.exterior[ci];
            // Candidate nodes within snap_radius, nearest first.
            std::vector<std::pair<double, size_t>> cands;
            for (size_t ni = 0; ni < part.graph_nodes.size(); ++ni) {
                const double d = distance(pos, part.graph_nodes[ni]);
                if (d <= cfg.snap_radius_m) cands.emplace_back(d, ni);
            }
            std::sort(cands.begin(), cands.end());
            if (static_cast<int>(cands.size()) > cfg.candidates_per_corner)
                cands.resize(cfg.candidates_per_corner);
            if (cands.empty()) continue;

            std::vector<State> next;
            for (const State& st : beam) {
                next.push_back(st);  // leave this corner unmapped
                for (const auto& [d, ni] : cands) {
                    State ns = st;
                    ns.mapping[ci] = ni;
                    ns.displacement += d;
                    ns.node_index_sum += ni;
                    try {
                        ns.ea = excess_area_plot(shape_with(ns.mapping), index);
                    } catch (const Error&) {
                        continue;  // snap collapsed the ring
                    }
                    next.push_back(std::move(ns));
                }
            }
            std::sort(next.begin(), next.end(), better);
            if (static_cast<int>(next.size()) > cfg.beam_width) next.resize(cfg.beam_width);
            beam = std::move(next);
        }

        // Pick the best state that satisfies the constraints and improves ea.
        const State* accepted = nullptr;
        Polygon accepted_shape;
        for (const State& st : beam) {
            if (st.mapping.empty()) continue;
            if (st.ea >= res.ea_before) continue;
            Polygon cand_shape;
            try {
                cand_shape = shape_with(st.mapping);
            } catch (const Error&) {
                continue;
            }
            const double a_new = area(cand_shape);
            if (std::abs(a_new - original_area[pi]) / original_area[pi] > cfg.area_bound_frac) continue;
            if (shape_deviation(current, cand_shape) > cfg.shape_bound_coeff * std::sqrt(original_area[pi]))
                continue;
            // Moving a shared vertex must not push any neighbor past the area bound.
            bool neighbors_ok = true;
            std::vector<std::pair<size_t, Point2D>> moved;
            for (const auto& [vi, ni] : st.mapping)
                moved.emplace_back(welded.plot_vertices[pi][vi], part.graph_nodes[ni]);
            std::set<size_t> affected;
            for (const auto& [widx, np] : moved)
                for (size_t nb : plots_of_vertex[widx])
                    if (nb != pi) affected.insert(nb);
            if (!affected.empty()) {
                std::vector<Point2D> saved;
                for (const auto& [widx, np] : moved) {
                    saved.push_back(welded.positions[widx]);
                    welded.positions[widx] = np;
                }
                for (size_t nb : affected) {
                    try {
                        const double a_nb = area(detail::plot_shape(welded, nb));
                        if (std::abs(a_nb - original_area[nb]) / original_area[nb] > cfg.area_bound_frac) {
                            neighbors_ok = false;
                            break;
                        }
                    } catch (const Error&) {
                        neighbors_ok = false;
                        break;
                    }
                }
                for (size_t k = 0; k < moved.size(); ++k) welded.positions[moved[k].first] = saved[k];
            }
            if (!neighbors_ok) continue;
            accepted = &st;
            accepted_shape = cand_shape;
            break;  // beam is sorted best-first
        }

        if (accepted) {
            for (const auto& [vi, ni] : accepted->mapping) {
                const size_t widx = welded.plot_vertices[pi][vi];
                welded.positions[widx] = part.graph_nodes[ni];
                welded.fixed[widx] = true;
            }
            res.mapping = accepted->mapping;
            res.ea_after = accepted->ea;
            res.area_change_frac = std::abs(area(accepted_shape) - original_area[pi]) / original_area[pi];
        } else {
            res.ea_after = res.ea_before;
            res.area_change_frac = 0.0;
        }
        results.push_back(std::move(res));
    }

    SurveyMap out = m;
    for (size_t pi = 0; pi < out.plots.size(); ++pi) {
        Ring r;
        for (size_t idx : welded.plot_vertices[pi]) r.push_back(welded.positions[idx]);
        out.plots[pi].shape = make_polygon(std::move(r));
    }
    // Report in plot order for stable output.
    std::sort(results.begin(), results.end(),
              [](const SnapResult& a, const SnapResult& b) { return a.plot_id < b.plot_id; });
    return {out, results};
}

}  // namespace matchfit
