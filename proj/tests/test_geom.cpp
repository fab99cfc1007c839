#include <matchfit/geom.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace matchfit;
using Catch::Approx;

namespace {
Polygon unit_square() { return make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }
}  // namespace

TEST_CASE("area of simple shapes") {
    CHECK(area(unit_square()) == Approx(1.0));

    Polygon with_hole = make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                                     {{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}}});
    CHECK(area(with_hole) == Approx(0.75));
}

TEST_CASE("area of a random 12-gon matches the Monte-Carlo oracle") {
    std::mt19937_64 rng(42);
    Polygon p = test_support::random_star(rng, {5, 5}, 4.0, 12);
    const double mc = test_support::mc_area(bounds(p), 1'000'000, 7,
                                            [&](Point2D pt) { return test_support::inside(p, pt); });
    CHECK(area(p) == Approx(mc).epsilon(1e-2));
}

TEST_CASE("degenerate rings are rejected") {
    CHECK_THROWS_AS(make_polygon({{0, 0}, {1, 1}}), DegenerateGeometry);
    CHECK_THROWS_AS(make_polygon({{0, 0}, {1, 1}, {2, 2}}), DegenerateGeometry);  // collinear
}

TEST_CASE("perimeter") {
    CHECK(perimeter(unit_square()) == Approx(4.0));
    CHECK(perimeter(make_polygon({{0, 0}, {3, 0}, {3, 4}})) == Approx(12.0));
    // regular hexagon, side 2
    Ring hex;
    for (int i = 0; i < 6; ++i)
        hex.push_back({2.0 * std::cos(M_PI * i / 3.0), 2.0 * std::sin(M_PI * i / 3.0)});
    CHECK(perimeter(make_polygon(hex)) == Approx(12.0));
}

TEST_CASE("centroid") {
    CHECK(centroid(unit_square()).x == Approx(0.5));
    CHECK(centroid(unit_square()).y == Approx(0.5));

    // L-shape: decomposition oracle (two rectangles).
    Polygon ell = make_polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}});
    // rect A = [0,2]x[0,1] area 2 centroid (1,0.5); rect B = [0,1]x[1,2] area 1 centroid (0.5,1.5)
    const double cx = (2.0 * 1.0 + 1.0 * 0.5) / 3.0;
    const double cy = (2.0 * 0.5 + 1.0 * 1.5) / 3.0;
    CHECK(centroid(ell).x == Approx(cx));
    CHECK(centroid(ell).y == Approx(cy));

    // translation equivariance
    Polygon moved = make_polygon({{10, -3}, {11, -3}, {11, -2}, {10, -2}});
    CHECK(centroid(moved).x == Approx(10.5));
    CHECK(centroid(moved).y == Approx(-2.5));
}

TEST_CASE("boolean operations on squares") {
    Polygon a = unit_square();

    SECTION("identical squares") {
        CHECK(area(intersect(a, a)) == Approx(1.0));
        CHECK(area(difference(a, a)) == Approx(0.0).margin(1e-12));
    }
    SECTION("offset by (0.5, 0)") {
        Polygon b = make_polygon({{0.5, 0}, {1.5, 0}, {1.5, 1}, {0.5, 1}});
        CHECK(area(intersect(a, b)) == Approx(0.5));
        CHECK(area(difference(a, b)) == Approx(0.5));
    }
    SECTION("disjoint") {
        Polygon b = make_polygon({{5, 5}, {6, 5}, {6, 6}, {5, 6}});
        CHECK(area(intersect(a, b)) == Approx(0.0).margin(1e-12));
        CHECK(area(difference(a, b)) == Approx(1.0));
    }
}

TEST_CASE("boolean areas on random convex pairs match the MC oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Polygon a = test_support::random_convex(rng, {0, 0}, 3.0);
        Polygon b = test_support::random_convex(rng, {1.0, 0.5}, 3.0);
        BoundingBox bb = bounds(a);
        bb.expand(bounds(b));
        const double mc_inter =
            test_support::mc_area(bb, 400'000, 100 + trial, [&](Point2D p) {
                return test_support::inside(a, p) && test_support::inside(b, p);
            });
        const double mc_diff =
            test_support::mc_area(bb, 400'000, 200 + trial, [&](Point2D p) {
                return test_support::inside(a, p) && !test_support::inside(b, p);
            });
        CHECK(area(intersect(a, b)) == Approx(mc_inter).margin(0.02 * area(a)));
        CHECK(area(difference(a, b)) == Approx(mc_diff).margin(0.02 * area(a)));
    }
}

TEST_CASE("inclusion-exclusion holds pairwise") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Polygon a = test_support::random_convex(rng, {0, 0}, 3.0);
        Polygon b = test_support::random_convex(rng, {1.5, -0.5}, 3.0);
        const double inter = area(intersect(a, b));
        const double d_ab = area(difference(a, b));
        const double d_ba = area(difference(b, a));
        CHECK(inter + d_ab == Approx(area(a)).epsilon(1e-9));
        CHECK(inter + d_ba == Approx(area(b)).epsilon(1e-9));
    }
}

TEST_CASE("areas are rigid-transform invariant") {
    std::mt19937_64 rng(5);
    Polygon a = test_support::random_star(rng, {0, 0}, 5.0, 9);
    const double theta = 0.7, tx = 13.0, ty = -4.0;
    Ring r;
    for (const Point2D& p : a.exterior)
        r.push_back({std::cos(theta) * p.x - std::sin(theta) * p.y + tx,
                     std::sin(theta) * p.x + std::cos(theta) * p.y + ty});
    Polygon b = make_polygon(r);
    CHECK(area(b) == Approx(area(a)).epsilon(1e-9));
    CHECK(perimeter(b) == Approx(perimeter(a)).epsilon(1e-9));
}

TEST_CASE("cleaning removes duplicate vertices and fixes orientation") {
    Polygon p = make_polygon({{0, 1}, {1, 1}, {1, 0}, {1, 0}, {0, 0}});  // CW with a dup
    CHECK(p.exterior.size() == 4);
    CHECK(signed_ring_area(p.exterior) > 0.0);  // exterior is CCW after cleaning
    CHECK(area(p) == Approx(1.0));
}
