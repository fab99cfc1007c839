#pragma once

#include <matchfit/geom.hpp>
#include <matchfit/model.hpp>

#include <cmath>

namespace matchfit {

/// Element of the search group T: translation + rotation + uniform scale,
/// applied about an externally chosen pivot c:  x' = s·R(theta)·(x − c) + c + (tx, ty).
struct SimilarityTransform {
    double tx = 0.0;     // m
    double ty = 0.0;     // m
    double theta = 0.0;  // rad
    double s = 1.0;

    bool is_identity() const { return tx == 0.0 && ty == 0.0 && theta == 0.0 && s == 1.0; }
};

inline Point2D apply(const SimilarityTransform& t, Point2D p, Point2D pivot) {
    const double c = std::cos(t.theta), sn = std::sin(t.theta);
    const double dx = p.x - pivot.x, dy = p.y - pivot.y;
    return {t.s * (c * dx - sn * dy) + pivot.x + t.tx,
            t.s * (sn * dx + c * dy) + pivot.y + t.ty};
}

inline Polygon apply(const SimilarityTransform& t, const Polygon& p, Point2D pivot) {
    Polygon out = p;
    for (Point2D& v : out.exterior) v = apply(t, v, pivot);
    for (Ring& h : out.holes)
        for (Point2D& v : h) v = apply(t, v, pivot);
    return out;
}

/// Map-level transform; pivot is the map bbox center.
inline SurveyMap apply_transform(const SurveyMap& m, const SimilarityTransform& t) {
    const Point2D pivot = bounds(m).center();
    SurveyMap out = m;
    for (auto& plot : out.plots) plot.shape = apply(t, plot.shape, pivot);
    return out;
}

}  // namespace matchfit
