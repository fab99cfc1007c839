#pragma once

#include <matchfit/geom.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace matchfit {

/// Interpolating 2D thin-plate spline displacement field built from
/// (point, displacement) constraints, with mild regularization.
class ThinPlateSpline {
public:
    ThinPlateSpline() = default;

    /// points and displacements must have equal size; points must be distinct.
    ThinPlateSpline(const std::vector<Point2D>& points, const std::vector<Point2D>& disp,
                    double lambda) {
        const int n = static_cast<int>(points.size());
        points_ = points;
        if (n == 0) return;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 3, n + 3);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                A(i, j) = kernel(distance(points[i], points[j])) + (i == j ? lambda : 0.0);
            A(i, n) = A(n, i) = 1.0;
            A(i, n + 1) = A(n + 1, i) = points[i].x;
            A(i, n + 2) = A(n + 2, i) = points[i].y;
            rhs(i, 0) = disp[i].x;
            rhs(i, 1) = disp[i].y;
        }
        // Min-norm solve keeps the field tame when the system is rank-deficient
        // (few or collinear control points).
        coef_ = A.completeOrthogonalDecomposition().solve(rhs);
    }

    bool empty() const { return points_.empty(); }

    /// Displacement of the field at x (no clamping here).
    Point2D displacement(Point2D x) const {
        const int n = static_cast<int>(points_.size());
        if (n == 0) return {0.0, 0.0};
        double dx = coef_(n, 0) + coef_(n + 1, 0) * x.x + coef_(n + 2, 0) * x.y;
        double dy = coef_(n, 1) + coef_(n + 1, 1) * x.x + coef_(n + 2, 1) * x.y;
        for (int i = 0; i < n; ++i) {
            const double u = kernel(distance(points_[i], x));
            dx += coef_(i, 0) * u;
            dy += coef_(i, 1) * u;
        }
        return {dx, dy};
    }

private:
    static double kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

    std::vector<Point2D> points_;
    Eigen::MatrixXd coef_;
};

}  // namespace matchfit
