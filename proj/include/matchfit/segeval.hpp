#pragma once

#include <matchfit/geom.hpp>
#include <matchfit/model.hpp>
#include <matchfit/spatial_index.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace matchfit {

struct Instance {
    std::string id;
    std::string class_label;
    MultiPolygon shape;
};

struct InstanceSet {
    std::vector<Instance> instances;
};

struct MatchTable {
    std::map<std::string, std::set<std::string>> gt_to_preds;
    std::map<std::string, std::set<std::string>> pred_to_gts;
};

/// Metric value that may be undefined (empty denominator); never a silent NaN.
struct MaybeMetric {
    double value = 0.0;
    bool defined = true;
};

struct ClassMetrics {
    double mean_iou = 0.0;
    double median_iou = 0.0;
    MaybeMetric over_seg{1.0, true};
    MaybeMetric under_seg{1.0, true};
    double fnr_percent = 0.0;
    MaybeMetric fpr_percent{0.0, true};
    size_t total_gt = 0;
    size_t total_pred = 0;
};

struct SegEvalReport {
    std::map<std::string, ClassMetrics> per_class;
    double overlap_frac = 0.10;
};

namespace detail {

inline double mp_intersection_area(const MultiPolygon& a, const MultiPolygon& b) {
    double total = 0.0;
    for (const Polygon& pa : a.parts) {
        const BoundingBox ba = bounds(pa);
        for (const Polygon& pb : b.parts) {
            const BoundingBox bb = bounds(pb);
            if (bb.min_x > ba.max_x || bb.max_x < ba.min_x || bb.min_y > ba.max_y || bb.max_y < ba.min_y)
                continue;
            total += area(intersect(pa, pb));
        }
    }
    return total;
}

inline MultiPolygon mp_union(const std::vector<const MultiPolygon*>& parts) {
    MultiPolygon u;
    for (const MultiPolygon* mp : parts)
        for (const Polygon& p : mp->parts) u = union_(u, p);
    return u;
}

}  // namespace detail

/// Pred p matches gt g iff same class and area(p ∩ g) >= overlap_frac * area(g).
inline MatchTable match_instances(const InstanceSet& gt, const InstanceSet& pred,
                                  double overlap_frac = 0.10) {
    MatchTable t;
    SpatialGrid grid(100.0);
    for (size_t i = 0; i < pred.instances.size(); ++i)
        grid.insert(i, bounds(pred.instances[i].shape));
    for (const Instance& g : gt.instances) {
        const double need = overlap_frac * area(g.shape);
        for (size_t pi : grid.query(bounds(g.shape))) {
            const Instance& p = pred.instances[pi];
            if (p.class_label != g.class_label) continue;
            const double inter = detail::mp_intersection_area(p.shape, g.shape);
            if (inter >= need && inter > 0.0) {
                t.gt_to_preds[g.id].insert(p.id);
                t.pred_to_gts[p.id].insert(g.id);
            }
        }
    }
    return t;
}

/// Modified mIoU: all preds matching one gt are merged before the IoU; gt
/// without a match scores 0; unmatched preds are ignored.
inline std::map<std::string, std::pair<double, double>> miou_modified(const InstanceSet& gt,
                                                                      const InstanceSet& pred,
                                                                      const MatchTable& t) {
    std::map<std::string, const Instance*> pred_by_id;
    for (const Instance& p : pred.instances) pred_by_id[p.id] = &p;

    std::map<std::string, std::vector<double>> ious_per_class;
    for (const Instance& g : gt.instances) {
        double iou = 0.0;
        auto it = t.gt_to_preds.find(g.id);
        if (it != t.gt_to_preds.end() && !it->second.empty()) {
            std::vector<const MultiPolygon*> merged;
            for (const std::string& pid : it->second) merged.push_back(&pred_by_id.at(pid)->shape);
            const MultiPolygon u = detail::mp_union(merged);
            const double inter = detail::mp_intersection_area(u, g.shape);
            const double uni = area(u) + area(g.shape) - inter;
            iou = uni > 0.0 ? inter / uni : 0.0;
        }
        ious_per_class[g.class_label].push_back(iou);
    }

    std::map<std::string, std::pair<double, double>> out;  // class -> (mean, median)
    for (auto& [cls, ious] : ious_per_class) {
        double sum = 0.0;
        for (double v : ious) sum += v;
        std::sort(ious.begin(), ious.end());
        const double median = ious[(ious.size() - 1) / 2];  // lower median on even counts
        out[cls] = {sum / ious.size(), median};
    }
    return out;
}

inline MaybeMetric over_seg(const InstanceSet& gt, const MatchTable& t, const std::string& cls) {
    size_t sum = 0, denom = 0;
    for (const Instance& g : gt.instances) {
        if (g.class_label != cls) continue;
        auto it = t.gt_to_preds.find(g.id);
        const size_t count = it == t.gt_to_preds.end() ? 0 : it->second.size();
        if (count > 0) {
            sum += count;
            ++denom;
        }
    }
    if (denom == 0) return {1.0, false};
    return {static_cast<double>(sum) / denom, true};
}

inline MaybeMetric under_seg(const InstanceSet& pred, const MatchTable& t, const std::string& cls) {
    size_t sum = 0, denom = 0;
    for (const Instance& p : pred.instances) {
        if (p.class_label != cls) continue;
        auto it = t.pred_to_gts.find(p.id);
        const size_t count = it == t.pred_to_gts.end() ? 0 : it->second.size();
        if (count > 0) {
            sum += count;
            ++denom;
        }
    }
    if (denom == 0) return {1.0, false};
    return {static_cast<double>(sum) / denom, true};
}

inline double fnr(const InstanceSet& gt, const MatchTable& t, const std::string& cls) {
    size_t total = 0, unmatched = 0;
    for (const Instance& g : gt.instances) {
        if (g.class_label != cls) continue;
        ++total;
        auto it = t.gt_to_preds.find(g.id);
        if (it == t.gt_to_preds.end() || it->second.empty()) ++unmatched;
    }
    return total == 0 ? 0.0 : 100.0 * unmatched / total;
}

inline MaybeMetric fpr(const InstanceSet& pred, const MatchTable& t, const std::string& cls) {
    size_t total = 0, unmatched = 0;
    for (const Instance& p : pred.instances) {
        if (p.class_label != cls) continue;
        ++total;
        auto it = t.pred_to_gts.find(p.id);
        if (it == t.pred_to_gts.end() || it->second.empty()) ++unmatched;
    }
    if (total == 0) return {0.0, false};
    return {100.0 * unmatched / total, true};
}

inline SegEvalReport evaluate(const InstanceSet& gt, const InstanceSet& pred,
                              double overlap_frac = 0.10) {
    SegEvalReport rep;
    rep.overlap_frac = overlap_frac;
    MatchTable t = match_instances(gt, pred, overlap_frac);
    auto ious = miou_modified(gt, pred, t);

    std::set<std::string> classes;
    for (const Instance& g : gt.instances) classes.insert(g.class_label);
    for (const Instance& p : pred.instances) classes.insert(p.class_label);
    for (const std::string& cls : classes) {
        ClassMetrics m;
        auto it = ious.find(cls);
        if (it != ious.end()) {
            m.mean_iou = it->second.first;
            m.median_iou = it->second.second;
        }
        m.over_seg = over_seg(gt, t, cls);
        m.under_seg = under_seg(pred, t, cls);
        m.fnr_percent = fnr(gt, t, cls);
        m.fpr_percent = fpr(pred, t, cls);
        for (const Instance& g : gt.instances)
            if (g.class_label == cls) ++m.total_gt;
        for (const Instance& p : pred.instances)
            if (p.class_label == cls) ++m.total_pred;
        rep.per_class[cls] = m;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Raster adapter: label image -> InstanceSet (one instance per 4-connected
// component of each nonzero label, polygonized as a union of unit cells).
// ---------------------------------------------------------------------------

inline InstanceSet instances_from_labels(const std::vector<std::vector<int>>& labels,
                                         const std::map<int, std::string>& class_of_label) {
    InstanceSet out;
    const size_t h = labels.size();
    const size_t w = h ? labels[0].size() : 0;
    std::vector<std::vector<int>> comp(h, std::vector<int>(w, -1));
    int next_comp = 0;
    for (size_t y = 0; y < h; ++y) {
        for (size_t x = 0; x < w; ++x) {
            if (labels[y][x] == 0 || comp[y][x] != -1) continue;
            const int label = labels[y][x];
            const int cid = next_comp++;
            std::vector<std::pair<size_t, size_t>> stack{{y, x}}, cells;
            comp[y][x] = cid;
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                cells.emplace_back(cy, cx);
                const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const long ny = static_cast<long>(cy) + dy[k], nx = static_cast<long>(cx) + dx[k];
                    if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
                    if (labels[ny][nx] != label || comp[ny][nx] != -1) continue;
                    comp[ny][nx] = cid;
                    stack.emplace_back(ny, nx);
                }
            }
            MultiPolygon shape;
            for (auto [cy, cx] : cells) {
                const double X = static_cast<double>(cx), Y = static_cast<double>(cy);
                shape = union_(shape, make_polygon({{X, Y}, {X + 1, Y}, {X + 1, Y + 1}, {X, Y + 1}}));
            }
            auto cit = class_of_label.find(label);
            out.instances.push_back({"L" + std::to_string(label) + "-" + std::to_string(cid),
                                     cit != class_of_label.end() ? cit->second : std::to_string(label),
                                     std::move(shape)});
        }
    }
    return out;
}

/// GeoJSON FeatureCollection -> InstanceSet (keys: instance_id, class).
inline InstanceSet load_instances(const std::string& bytes,
                                  std::optional<ProjectionSpec> crs = std::nullopt) {
    InstanceSet out;
    ProjectionSpec crs_out;
    auto features = detail::load_features(bytes, crs, crs_out, nullptr);
    std::map<std::string, size_t> by_id;
    for (auto& f : features) {
        std::string id = f.id;
        if (f.properties.contains("instance_id") && f.properties["instance_id"].is_string())
            id = f.properties["instance_id"].get<std::string>();
        std::string cls = "field";
        if (f.properties.contains("class") && f.properties["class"].is_string())
            cls = f.properties["class"].get<std::string>();
        auto it = by_id.find(id);
        if (it != by_id.end()) {
            out.instances[it->second].shape.parts.push_back(std::move(f.shape));
        } else {
            by_id[id] = out.instances.size();
            out.instances.push_back({id, cls, MultiPolygon{{std::move(f.shape)}}});
        }
    }
    return out;
}

}  // namespace matchfit
