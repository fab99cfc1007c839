#pragma once

#include <matchfit/geom.hpp>
#include <matchfit/model.hpp>
#include <matchfit/olc.hpp>
#include <matchfit/spatial_index.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace matchfit {

struct Detection {
    std::string feature_id;
    std::string class_label;
    Polygon shape;
    std::string observed_at;  // ISO-8601 UTC; lexicographic order == temporal order
    std::string source_image_id;
};

struct PipelineConfig {
    double spike_angle_max_deg = 15.0;
    double area_tol_frac = 0.01;
    double simplify_tol_m = 0.3;
    double iou_thresh = 0.5;
    int cell_level = 13;
    std::set<std::string> deny_cells;
};

// ---------------------------------------------------------------------------
// Dagger removal
// ---------------------------------------------------------------------------

namespace detail {

inline double interior_angle_deg(const Ring& r, size_t i) {
    const size_t n = r.size();
    const Point2D u = r[(i + n - 1) % n] - r[i];
    const Point2D w = r[(i + 1) % n] - r[i];
    const double nu = norm(u), nw = norm(w);
    if (nu == 0.0 || nw == 0.0) return 0.0;
    const double c = std::clamp(dot(u, w) / (nu * nw), -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

inline void douglas_peucker(const Ring& pts, size_t lo, size_t hi, double tol,
                            std::vector<bool>& keep) {
    if (hi <= lo + 1) return;
    double worst = -1.0;
    size_t split = lo;
    for (size_t i = lo + 1; i < hi; ++i) {
        const double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
        if (d > worst) {
            worst = d;
            split = i;
        }
    }
    if (worst > tol) {
        keep[split] = true;
        douglas_peucker(pts, lo, split, tol, keep);
        douglas_peucker(pts, split, hi, tol, keep);
    }
}

inline Ring simplify_ring(const Ring& r, double tol) {
    const size_t n = r.size();
    if (n <= 4) return r;
    // Anchor at vertex 0 and the vertex farthest from it, then DP each half.
    size_t far = 0;
    double best = -1.0;
    for (size_t i = 1; i < n; ++i) {
        const double d = distance(r[0], r[i]);
        if (d > best) {
            best = d;
            far = i;
        }
    }
    std::vector<bool> keep(n, false);
    keep[0] = keep[far] = true;
    douglas_peucker(r, 0, far, tol, keep);
    Ring wrapped(r.begin() + static_cast<long>(far), r.end());
    wrapped.push_back(r[0]);
    std::vector<bool> keep2(wrapped.size(), false);
    keep2.front() = keep2.back() = true;
    douglas_peucker(wrapped, 0, wrapped.size() - 1, tol, keep2);
    for (size_t i = 1; i + 1 < wrapped.size(); ++i)
        if (keep2[i]) keep[far + i] = true;
    Ring out;
    for (size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(r[i]);
    return out;
}

}  // namespace detail

/// Delete spike vertices (interior angle < spike_angle_max) while the
/// cumulative area change stays within area_tol_frac, then simplify.
/// A degenerate result returns the input unchanged with warned=true.
inline Polygon dagger_removal(const Polygon& p, double spike_angle_max_deg = 15.0,
                              double area_tol_frac = 0.01, double simplify_tol_m = 0.3,
                              bool* warned = nullptr) {
    if (warned) *warned = false;
    const double a0 = area(p);
    Ring ring = p.exterior;

    while (ring.size() > 3) {
        size_t spike = ring.size();
        double min_angle = spike_angle_max_deg;
        for (size_t i = 0; i < ring.size(); ++i) {
            const double a = detail::interior_angle_deg(ring, i);
            if (a < min_angle) {
                min_angle = a;
                spike = i;
            }
        }
        if (spike == ring.size()) break;
        Ring trial = ring;
        trial.erase(trial.begin() + static_cast<long>(spike));
        const double a_trial = std::abs(signed_ring_area(trial));
        if (std::abs(a_trial - a0) / a0 > area_tol_frac) break;
        ring = std::move(trial);
    }

    Ring simplified = detail::simplify_ring(ring, simplify_tol_m);
    if (simplified.size() >= 3) {
        const double a_s = std::abs(signed_ring_area(simplified));
        if (std::abs(a_s - a0) / a0 <= area_tol_frac) ring = std::move(simplified);
    }

    try {
        Polygon out = make_polygon(std::move(ring), p.holes);
        return out;
    } catch (const DegenerateGeometry&) {
        if (warned) *warned = true;
        return p;
    }
}

// ---------------------------------------------------------------------------
// De-duplication
// ---------------------------------------------------------------------------

inline double polygon_iou(const Polygon& a, const Polygon& b) {
    const double inter = area(intersect(a, b));
    const double uni = area(a) + area(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Connected components of the same-class IoU >= thresh overlap graph; the
/// survivor of each component is the most recent image, then larger area,
/// then lexicographically smallest feature id.
inline std::vector<Detection> dedup(const std::vector<Detection>& dets, double iou_thresh = 0.5) {
    const size_t n = dets.size();
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    SpatialGrid grid(100.0);
    for (size_t i = 0; i < n; ++i) grid.insert(i, bounds(dets[i].shape));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j : grid.query(bounds(dets[i].shape))) {
            if (j <= i) continue;
            if (dets[i].class_label != dets[j].class_label) continue;
            if (polygon_iou(dets[i].shape, dets[j].shape) >= iou_thresh)
                parent[find(i)] = find(j);
        }
    }

    std::map<size_t, size_t> survivor;  // root -> detection index
    for (size_t i = 0; i < n; ++i) {
        const size_t root = find(i);
        auto it = survivor.find(root);
        if (it == survivor.end()) {
            survivor[root] = i;
            continue;
        }
        const Detection& cur = dets[it->second];
        const Detection& cand = dets[i];
        bool replace = false;
        if (cand.observed_at != cur.observed_at) {
            replace = cand.observed_at > cur.observed_at;
        } else {
            const double ac = area(cand.shape), au = area(cur.shape);
            if (ac != au)
                replace = ac > au;
            else
                replace = cand.feature_id < cur.feature_id;
        }
        if (replace) it->second = i;
    }

    std::vector<size_t> kept;
    for (const auto& [root, idx] : survivor) kept.push_back(idx);
    std::sort(kept.begin(), kept.end());  // ingestion order
    std::vector<Detection> out;
    for (size_t idx : kept) out.push_back(dets[idx]);
    return out;
}

// ---------------------------------------------------------------------------
// Plus-code identifiers
// ---------------------------------------------------------------------------

/// Plus-code of each detection's centroid; colliding codes get -1, -2, ...
/// suffixes in ingestion order. Returns the id per detection.
inline std::vector<std::string> assign_plus_code_ids(const std::vector<Detection>& dets,
                                                     const ProjectionSpec& crs) {
    std::vector<std::string> ids;
    std::map<std::string, int> seen;
    for (const Detection& d : dets) {
        const Point2D c = centroid(d.shape);
        auto [lat, lng] = unproject(crs, c);
        std::string code = plus_code(lat, lng);
        int& count = seen[code];
        if (count > 0) code += "-" + std::to_string(count);
        ++count;
        ids.push_back(code);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Cell sharding (Web-Mercator quadtree; level 13 cell edge ~1.2 km)
// ---------------------------------------------------------------------------

struct CellShard {
    std::string cell_token;
    std::vector<size_t> feature_indices;  // into the input detection list
};

/// Token grammar: Z{level}-X{ix}-Y{iy} on a 2^(level+2) x 2^(level+2)
/// Web-Mercator grid, so the level-13 cell edge is ~1.22 km at the equator.
inline std::string cell_token(double lat, double lng, int level) {
    const std::int64_t n = std::int64_t{1} << (level + 2);
    lat = std::clamp(lat, -85.05112878, 85.05112878);
    const double x = (lng + 180.0) / 360.0;
    const double lat_rad = lat * M_PI / 180.0;
    const double y = (1.0 - std::log(std::tan(lat_rad) + 1.0 / std::cos(lat_rad)) / M_PI) / 2.0;
    const std::int64_t ix = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(x * n)), 0, n - 1);
    const std::int64_t iy = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(y * n)), 0, n - 1);
    return "Z" + std::to_string(level) + "-X" + std::to_string(ix) + "-Y" + std::to_string(iy);
}

/// Each detection goes to exactly one cell, by centroid.
inline std::vector<CellShard> shard_by_cells(const std::vector<Detection>& dets,
                                             const ProjectionSpec& crs, int level = 13) {
    std::map<std::string, CellShard> shards;
    for (size_t i = 0; i < dets.size(); ++i) {
        const Point2D c = centroid(dets[i].shape);
        auto [lat, lng] = unproject(crs, c);
        const std::string token = cell_token(lat, lng, level);
        auto& shard = shards[token];
        shard.cell_token = token;
        shard.feature_indices.push_back(i);
    }
    std::vector<CellShard> out;
    for (auto& [token, shard] : shards) out.push_back(std::move(shard));
    return out;
}

// ---------------------------------------------------------------------------
// Detection GeoJSON I/O
// ---------------------------------------------------------------------------

inline std::vector<Detection> load_detections(const std::string& bytes, ProjectionSpec& crs_out,
                                              std::optional<ProjectionSpec> crs = std::nullopt) {
    std::vector<Detection> out;
    auto features = detail::load_features(bytes, crs, crs_out, nullptr);
    for (auto& f : features) {
        Detection d;
        d.feature_id = f.id;
        if (f.properties.contains("feature_id") && f.properties["feature_id"].is_string())
            d.feature_id = f.properties["feature_id"].get<std::string>();
        d.class_label = f.properties.value("class", "field");
        d.observed_at = f.properties.value("observed_at", "");
        d.source_image_id = f.properties.value("source_image_id", "");
        d.shape = std::move(f.shape);
        out.push_back(std::move(d));
    }
    return out;
}

inline nlohmann::json detection_feature(const Detection& d, const std::string& id,
                                        const ProjectionSpec& crs) {
    nlohmann::json props = {{"feature_id", id}, {"class", d.class_label}};
    if (!d.observed_at.empty()) props["observed_at"] = d.observed_at;
    if (!d.source_image_id.empty()) props["source_image_id"] = d.source_image_id;
    return {{"type", "Feature"},
            {"properties", props},
            {"geometry", geojson::polygon_to_geometry(d.shape, crs)}};
}

/// One <token>.geojson per shard, written atomically (temp + rename).
inline void emit_shards(const std::vector<Detection>& dets, const std::vector<std::string>& ids,
                        const std::vector<CellShard>& shards, const ProjectionSpec& crs,
                        const std::filesystem::path& out_dir,
                        const std::set<std::string>& deny_cells = {}) {
    std::filesystem::create_directories(out_dir);
    for (const CellShard& shard : shards) {
        if (deny_cells.count(shard.cell_token)) continue;
        nlohmann::json features = nlohmann::json::array();
        for (size_t i : shard.feature_indices)
            features.push_back(detection_feature(dets[i], ids[i], crs));
        nlohmann::json fc = {{"type", "FeatureCollection"},
                             {"cell_token", shard.cell_token},
                             {"features", features}};
        const auto final_path = out_dir / (shard.cell_token + ".geojson");
        const auto tmp_path = out_dir / (shard.cell_token + ".geojson.tmp");
        {
            std::ofstream os(tmp_path);
            os << fc.dump(2) << "\n";
        }
        std::filesystem::rename(tmp_path, final_path);
    }
}

}  // namespace matchfit
