#pragma once

#include <matchfit/model.hpp>
#include <matchfit/tps.hpp>
#include <matchfit/transform.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace matchfit {

/// Synthetic-village generator: a jittered grid tiling shared by farms and
/// survey plots, with a configurable perturbation applied to the survey side.
struct FixtureConfig {
    int n_plots = 100;                 // rounded to a near-square grid
    double cell_m = 100.0;             // nominal plot edge (y direction)
    double cell_aspect = 1.0;          // x edge = cell_m * cell_aspect
    double grid_jitter_m = 15.0;       // interior grid-node jitter (shared by both sides)
    std::uint64_t seed = 1;

    enum class Perturb { None, Similarity, Tps, Corner } perturb = Perturb::Similarity;
    SimilarityTransform transform{10.0, -5.0, 0.0, 1.0};  // Similarity mode
    double vertex_noise_m = 0.5;       // iid per welded vertex, all modes
    double tps_max_disp_m = 8.0;       // Tps mode field amplitude
    double tps_min_frac = 0.9;         // field magnitude drawn from [min_frac, 1] * max
    double tps_dir_deg = 90.0;         // mean field direction (slowly rotating around it)
    double tps_control_spacing_m = 500.0;

    double origin_lat = 18.5;          // WGS84 anchor for GeoJSON output
    double origin_lng = 73.8;
};

struct Fixture {
    SurveyMap survey;   // perturbed
    FarmSet farms;      // ground truth
};

inline Fixture gen_fixture(const FixtureConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    const int cols = std::max(1, static_cast<int>(std::round(std::sqrt(static_cast<double>(cfg.n_plots)))));
    const int rows = std::max(1, (cfg.n_plots + cols - 1) / cols);

    // Grid nodes, interior ones jittered; the tiling stays a tiling because
    // plots reference the shared nodes.
    std::vector<std::vector<Point2D>> node(rows + 1, std::vector<Point2D>(cols + 1));
    for (int r = 0; r <= rows; ++r) {
        for (int c = 0; c <= cols; ++c) {
            Point2D p{c * cfg.cell_m * cfg.cell_aspect, r * cfg.cell_m};
            if (r > 0 && r < rows && c > 0 && c < cols) {
                p.x += cfg.grid_jitter_m * uni(rng);
                p.y += cfg.grid_jitter_m * uni(rng);
            }
            node[r][c] = p;
        }
    }

    ProjectionSpec crs{cfg.origin_lat, cfg.origin_lng};
    Fixture fx;
    fx.survey.crs = crs;
    fx.survey.stage = MapStage::M0;
    fx.farms.crs = crs;

    int made = 0;
    for (int r = 0; r < rows && made < cfg.n_plots; ++r) {
        for (int c = 0; c < cols && made < cfg.n_plots; ++c, ++made) {
            Ring ring{node[r][c], node[r][c + 1], node[r + 1][c + 1], node[r + 1][c]};
            const std::string suffix = std::to_string(made);
            fx.farms.plots.push_back({"F" + suffix, make_polygon(ring)});
            fx.survey.plots.push_back({"P" + suffix, make_polygon(ring), area(make_polygon(ring))});
        }
    }

    // Perturb the survey side; welded vertices move together so the survey map
    // stays a partition.
    if (cfg.perturb == FixtureConfig::Perturb::Similarity) {
        fx.survey = apply_transform(fx.survey, cfg.transform);
        fx.survey.stage = MapStage::M0;
    }

    ThinPlateSpline tps_field;
    if (cfg.perturb == FixtureConfig::Perturb::Tps) {
        const BoundingBox b = bounds(fx.survey);
        std::vector<Point2D> cps, disps;
        // Smoothly rotating direction keeps the field large almost everywhere
        // while staying area-friendly at this control spacing.
        const double phi0 = cfg.tps_dir_deg * M_PI / 180.0;
        std::uniform_real_distribution<double> mag(cfg.tps_min_frac * cfg.tps_max_disp_m,
                                                   cfg.tps_max_disp_m);
        for (double y = b.min_y - cfg.tps_control_spacing_m; y <= b.max_y + cfg.tps_control_spacing_m;
             y += cfg.tps_control_spacing_m) {
            for (double x = b.min_x - cfg.tps_control_spacing_m; x <= b.max_x + cfg.tps_control_spacing_m;
                 x += cfg.tps_control_spacing_m) {
                const double ang = phi0 + 0.8 * (x + y) / (b.width() + b.height() + 1.0);
                const double m2 = mag(rng);
                cps.push_back({x, y});
                disps.push_back({m2 * std::cos(ang), m2 * std::sin(ang)});
            }
        }
        tps_field = ThinPlateSpline(cps, disps, 0.0);
    }

    // Welded per-vertex noise (and the TPS field) applied jointly.
    std::map<std::pair<long long, long long>, Point2D> moved;
    auto perturb_vertex = [&](Point2D v) {
        const auto key = std::make_pair(std::llround(v.x * 1e6), std::llround(v.y * 1e6));
        auto it = moved.find(key);
        if (it != moved.end()) return it->second;
        Point2D out = v;
        if (cfg.perturb == FixtureConfig::Perturb::Tps) out = out + tps_field.displacement(v);
        if (cfg.vertex_noise_m > 0.0 && cfg.perturb != FixtureConfig::Perturb::None) {
            out.x += cfg.vertex_noise_m * uni(rng);
            out.y += cfg.vertex_noise_m * uni(rng);
        }
        moved[key] = out;
        return out;
    };
    if (cfg.perturb == FixtureConfig::Perturb::Tps || cfg.perturb == FixtureConfig::Perturb::Corner ||
        (cfg.perturb == FixtureConfig::Perturb::Similarity && cfg.vertex_noise_m > 0.0)) {
        for (auto& plot : fx.survey.plots) {
            Ring r = plot.shape.exterior;
            for (Point2D& v : r) v = perturb_vertex(v);
            plot.shape = make_polygon(std::move(r));
        }
    }
    return fx;
}

}  // namespace matchfit
