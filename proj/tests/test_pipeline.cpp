#include <matchfit/pipeline.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_support.hpp"

using namespace matchfit;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

Polygon box(double x0, double y0, double x1, double y1) {
    return make_polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

Detection det(const std::string& id, const Polygon& p, const std::string& t,
              const std::string& cls = "field") {
    return {id, cls, p, t, "img-" + id};
}

double min_interior_angle(const Ring& r) {
    double best = 360.0;
    const size_t n = r.size();
    for (size_t i = 0; i < n; ++i) {
        const Point2D u = r[(i + n - 1) % n] - r[i];
        const Point2D w = r[(i + 1) % n] - r[i];
        const double nu = norm(u), nw = norm(w);
        if (nu == 0 || nw == 0) continue;
        best = std::min(best, std::acos(std::clamp(dot(u, w) / (nu * nw), -1.0, 1.0)) * 180.0 / M_PI);
    }
    return best;
}

}  // namespace

TEST_CASE("dagger removal recovers a square from a needle spike") {
    // 10 m square with a 1 m long, 0.05 m wide spike on the north edge.
    Ring r{{0, 0}, {10, 0}, {10, 10}, {5.025, 10}, {5.0, 11.0}, {4.975, 10}, {0, 10}};
    Polygon p = make_polygon(r);
    const double a0 = area(p);
    Polygon out = dagger_removal(p);
    CHECK(out.exterior.size() <= 5);
    CHECK(std::abs(area(out) - 100.0) / 100.0 < 1e-3);
    CHECK(std::abs(area(out) - a0) / a0 < 1e-2);
    CHECK(min_interior_angle(out.exterior) > 15.0);
}

TEST_CASE("dagger removal leaves benign convex polygons alone") {
    Polygon sq = box(0, 0, 10, 10);
    Polygon out = dagger_removal(sq);
    REQUIRE(out.exterior.size() == 4);
    CHECK(area(out) == Approx(100.0));
}

TEST_CASE("dagger removal never grows vertex count or breaks the area budget") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        // Base octagon plus thin spikes on up to two distinct edges.
        Ring base;
        for (int i = 0; i < 8; ++i) {
            const double a = 2 * M_PI * i / 8;
            base.push_back({20 * std::cos(a), 20 * std::sin(a)});
        }
        std::set<size_t> spike_edges;
        const int spikes = 1 + static_cast<int>(u01(rng) * 2);
        while (static_cast<int>(spike_edges.size()) < spikes)
            spike_edges.insert(static_cast<size_t>(u01(rng) * 8));
        Ring r;
        for (size_t e = 0; e < 8; ++e) {
            r.push_back(base[e]);
            if (!spike_edges.count(e)) continue;
            const Point2D a = base[e], b = base[(e + 1) % 8];
            const Point2D mid = 0.5 * (a + b);
            const Point2D outn{mid.x * 0.15, mid.y * 0.15};  // radial spike, ~3 m
            const Point2D half = 0.002 * (b - a);
            r.push_back(mid - half);
            r.push_back(mid + outn);
            r.push_back(mid + half);
        }
        Polygon p = make_polygon(r);
        const double a0 = area(p);
        Polygon out = dagger_removal(p);
        CHECK(out.exterior.size() <= p.exterior.size());
        CHECK(std::abs(area(out) - a0) / a0 <= 0.01 + 1e-9);

        // Exhaustive oracle on the <=14-gon: if some deletion subset removes
        // all sub-15-degree spikes within the 1% budget, the output has none.
        const Ring& ring = p.exterior;
        const size_t n = ring.size();
        bool oracle_spike_free = false;
        for (std::uint32_t mask = 0; mask < (1u << n) && !oracle_spike_free; ++mask) {
            Ring kept;
            for (size_t i = 0; i < n; ++i)
                if (!(mask & (1u << i))) kept.push_back(ring[i]);
            if (kept.size() < 3) continue;
            const double ak = std::abs(signed_ring_area(kept));
            if (std::abs(ak - a0) / a0 > 0.01) continue;
            if (min_interior_angle(kept) >= 15.0) oracle_spike_free = true;
        }
        if (oracle_spike_free) CHECK(min_interior_angle(out.exterior) >= 15.0);
    }
}

TEST_CASE("dedup keeps the most recent copy") {
    std::vector<Detection> dets{det("a", box(0, 0, 1, 1), "2023-01-01T00:00:00Z"),
                                det("b", box(0, 0, 1, 1), "2023-06-01T00:00:00Z")};
    auto out = dedup(dets);
    REQUIRE(out.size() == 1);
    CHECK(out[0].feature_id == "b");
}

TEST_CASE("dedup keeps disjoint detections and splits by class") {
    std::vector<Detection> dets{det("a", box(0, 0, 1, 1), "2023-01-01T00:00:00Z"),
                                det("b", box(5, 0, 6, 1), "2023-01-01T00:00:00Z"),
                                det("c", box(0, 0, 1, 1), "2023-01-01T00:00:00Z", "water")};
    auto out = dedup(dets);
    CHECK(out.size() == 3);
}

TEST_CASE("dedup collapses an overlap chain to one survivor") {
    // IoU(a,b) = IoU(b,c) = 0.6 but IoU(a,c) = 1/3: one component, one survivor.
    std::vector<Detection> dets{det("a", box(0, 0, 1, 1), "2023-01-01T00:00:00Z"),
                                det("b", box(0.25, 0, 1.25, 1), "2023-02-01T00:00:00Z"),
                                det("c", box(0.5, 0, 1.5, 1), "2023-03-01T00:00:00Z")};
    CHECK(polygon_iou(dets[0].shape, dets[2].shape) < 0.5);
    auto out = dedup(dets);
    REQUIRE(out.size() == 1);
    CHECK(out[0].feature_id == "c");  // most recent in the component
}

TEST_CASE("dedup tie-breaks by area then feature id") {
    std::vector<Detection> dets{det("big", box(0, 0, 1.05, 1), "2023-01-01T00:00:00Z"),
                                det("small", box(0, 0, 1, 1), "2023-01-01T00:00:00Z")};
    auto out = dedup(dets);
    REQUIRE(out.size() == 1);
    CHECK(out[0].feature_id == "big");

    std::vector<Detection> same{det("zeta", box(0, 0, 1, 1), "2023-01-01T00:00:00Z"),
                                det("alpha", box(0, 0, 1, 1), "2023-01-01T00:00:00Z")};
    auto out2 = dedup(same);
    REQUIRE(out2.size() == 1);
    CHECK(out2[0].feature_id == "alpha");
}

TEST_CASE("dedup output has no same-class pair at or above the threshold") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> upos(0.0, 40.0);
    std::vector<Detection> dets;
    for (int i = 0; i < 120; ++i) {
        const double x = upos(rng), y = upos(rng);
        dets.push_back(det("d" + std::to_string(i), box(x, y, x + 3, y + 3),
                           "2023-01-01T00:00:0" + std::to_string(i % 10) + "Z"));
    }
    auto out = dedup(dets, 0.5);
    for (size_t i = 0; i < out.size(); ++i)
        for (size_t j = i + 1; j < out.size(); ++j)
            CHECK(polygon_iou(out[i].shape, out[j].shape) < 0.5);
}

TEST_CASE("plus codes match frozen reference vectors") {
    // Values cross-checked against an independent encoder implementation.
    CHECK(plus_code(20.3701125, 2.782234375) == "7FG49QCJ+2V");
    CHECK(plus_code(47.0000625, 8.0000625) == "8FVC2222+22");
    CHECK(plus_code(-41.2730625, 174.7859375) == "4VCPPQGP+Q9");
    CHECK(plus_code(18.5, 73.8) == "7JCMGR22+22");
    // Point exactly on a cell boundary encodes into the containing (half-open) cell.
    CHECK(plus_code(2.0, 8.0) == "6FJC2222+22");
}

TEST_CASE("plus-code ids get collision suffixes in ingestion order") {
    ProjectionSpec crs{18.5, 73.8};
    std::vector<Detection> dets{det("a", box(0, 0, 1, 1), "t"), det("b", box(0, 0, 1, 1), "t"),
                                det("c", box(0, 0, 1, 1), "t"), det("d", box(5000, 0, 5001, 1), "t")};
    auto ids = assign_plus_code_ids(dets, crs);
    REQUIRE(ids.size() == 4);
    CHECK(ids[1] == ids[0] + "-1");
    CHECK(ids[2] == ids[0] + "-2");
    CHECK(ids[3] != ids[0]);
    CHECK(ids[3].find('-') == std::string::npos);
}

TEST_CASE("cell tokens follow the quadkey grammar") {
    CHECK(cell_token(0.0, 0.0, 13) == "Z13-X16384-Y16384");
    CHECK(cell_token(0.0, -180.0, 13) == "Z13-X0-Y16384");
    // One level deeper doubles the grid.
    CHECK(cell_token(0.0, 0.0, 14) == "Z14-X32768-Y32768");
    // Northern latitudes get smaller y indices.
    const std::string north = cell_token(40.0, 0.0, 13);
    CHECK(north.substr(0, 10) == "Z13-X16384");
    const long iy = std::stol(north.substr(north.find("-Y") + 2));
    CHECK(iy < 16384);
}

TEST_CASE("sharding is an exact partition by centroid") {
    ProjectionSpec crs{18.5, 73.8};
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-5000.0, 5000.0);
    std::vector<Detection> dets;
    for (int i = 0; i < 300; ++i) {
        const double x = u(rng), y = u(rng);
        dets.push_back(det("d" + std::to_string(i), box(x, y, x + 40, y + 40), "t"));
    }
    auto shards = shard_by_cells(dets, crs, 13);
    std::vector<int> seen(dets.size(), 0);
    for (const auto& s : shards) {
        CHECK(s.cell_token.rfind("Z13-", 0) == 0);
        for (size_t i : s.feature_indices) ++seen[i];
        // Every feature's centroid re-encodes to its shard token.
        for (size_t i : s.feature_indices) {
            auto [lat, lng] = unproject(crs, centroid(dets[i].shape));
            CHECK(cell_token(lat, lng, 13) == s.cell_token);
        }
    }
    for (int c : seen) CHECK(c == 1);
}

TEST_CASE("emit_shards writes one file per cell and honors the deny list") {
    ProjectionSpec crs{18.5, 73.8};
    std::vector<Detection> dets{det("a", box(0, 0, 10, 10), "2023-01-01T00:00:00Z"),
                                det("b", box(3000, 0, 3010, 10), "2023-01-01T00:00:00Z")};
    auto ids = assign_plus_code_ids(dets, crs);
    auto shards = shard_by_cells(dets, crs, 13);
    REQUIRE(shards.size() == 2);

    const fs::path dir = fs::temp_directory_path() / "shard-test";
    fs::remove_all(dir);
    emit_shards(dets, ids, shards, crs, dir);
    for (const auto& s : shards) CHECK(fs::exists(dir / (s.cell_token + ".geojson")));

    fs::remove_all(dir);
    emit_shards(dets, ids, shards, crs, dir, {shards[0].cell_token});
    CHECK_FALSE(fs::exists(dir / (shards[0].cell_token + ".geojson")));
    CHECK(fs::exists(dir / (shards[1].cell_token + ".geojson")));
    fs::remove_all(dir);
}

TEST_CASE("detections round-trip through GeoJSON") {
    ProjectionSpec crs{18.5, 73.8};
    std::vector<Detection> dets{det("a", box(0, 0, 100, 100), "2023-01-01T00:00:00Z")};
    nlohmann::json fc = {{"type", "FeatureCollection"},
                         {"features", {detection_feature(dets[0], "a", crs)}}};
    ProjectionSpec crs_out;
    auto loaded = load_detections(fc.dump(), crs_out, crs);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].feature_id == "a");
    CHECK(loaded[0].class_label == "field");
    CHECK(loaded[0].observed_at == "2023-01-01T00:00:00Z");
    CHECK(area(loaded[0].shape) == Approx(10000.0).epsilon(1e-6));
}
