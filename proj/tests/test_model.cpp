#include <matchfit/metrics.hpp>
#include <matchfit/model.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <random>

#include "test_support.hpp"

using namespace matchfit;
using Catch::Approx;
using nlohmann::json;

namespace {

json feature(const json& geometry, const json& props = json::object()) {
    return {{"type", "Feature"}, {"properties", props}, {"geometry", geometry}};
}

std::string collection(json features) {
    // Brace-init of a single json element copies it instead of forming a
    // one-element array; normalize so single-feature collections work.
    if (!features.is_array()) features = json::array({std::move(features)});
    return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

json square_deg(double lng0, double lat0, double size) {
    return {{"type", "Polygon"},
            {"coordinates",
             {{{lng0, lat0},
               {lng0 + size, lat0},
               {lng0 + size, lat0 + size},
               {lng0, lat0 + size},
               {lng0, lat0}}}}};
}

}  // namespace

TEST_CASE("unit-degree square at the equator has the expected area") {
    SurveyMap m = load_survey_map(collection({feature(square_deg(0.0, 0.0, 1.0))}));
    REQUIRE(m.plots.size() == 1);
    // Geodesy oracle: spherical area of a 1-degree quad at the equator,
    // R^2 * dlambda * (sin(lat1) - sin(lat0)); roughly (111.32 km)^2.
    const double R = 6378137.0;
    const double expected = R * R * (M_PI / 180.0) * std::sin(M_PI / 180.0);
    CHECK(area(m.plots[0].shape) == Approx(expected).epsilon(5e-3));
    CHECK(expected == Approx(111.32e3 * 111.32e3).epsilon(5e-3));
}

TEST_CASE("empty FeatureCollection loads as an empty map") {
    SurveyMap m = load_survey_map(collection(json::array()));
    CHECK(m.plots.empty());
}

TEST_CASE("non-polygon geometry is rejected with the feature index") {
    const json line = {{"type", "LineString"}, {"coordinates", {{0.0, 0.0}, {1.0, 1.0}}}};
    const std::string bytes = collection({feature(square_deg(0, 0, 0.001)), feature(line)});
    CHECK_THROWS_WITH(load_survey_map(bytes), Catch::Matchers::ContainsSubstring("feature 1"));
    CHECK_THROWS_AS(load_survey_map(bytes), UnsupportedGeometry);
}

TEST_CASE("invalid JSON raises ParseError") {
    CHECK_THROWS_AS(load_survey_map("{not json"), ParseError);
}

TEST_CASE("missing plot_id synthesizes a deterministic id and warns") {
    std::vector<std::string> warnings;
    SurveyMap m = load_survey_map(collection({feature(square_deg(0, 0, 0.001))}), std::nullopt, &warnings);
    REQUIRE(m.plots.size() == 1);
    CHECK(m.plots[0].id == "feature-0");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("feature-0") != std::string::npos);
}

TEST_CASE("MultiPolygon features split into one plot per part with suffixed ids") {
    json mp = {{"type", "MultiPolygon"},
               {"coordinates",
                {square_deg(0, 0, 0.001)["coordinates"], square_deg(0.01, 0, 0.001)["coordinates"]}}};
    SurveyMap m = load_survey_map(collection({feature(mp, {{"plot_id", "X"}})}));
    REQUIRE(m.plots.size() == 2);
    CHECK(m.plots[0].id == "X#1");
    CHECK(m.plots[1].id == "X#2");
}

TEST_CASE("properties plot_id, legal_area_sqm, observed_at are honored") {
    SurveyMap m = load_survey_map(
        collection({feature(square_deg(0, 0, 0.001), {{"plot_id", "P7"}, {"legal_area_sqm", 123.5}})}));
    REQUIRE(m.plots.size() == 1);
    CHECK(m.plots[0].id == "P7");
    REQUIRE(m.plots[0].legal_area_sqm.has_value());
    CHECK(*m.plots[0].legal_area_sqm == Approx(123.5));

    FarmSet f = load_farm_set(collection(
        {feature(square_deg(0, 0, 0.001), {{"plot_id", "F1"}, {"observed_at", "2023-04-01T00:00:00Z"}})}));
    REQUIRE(f.plots.size() == 1);
    CHECK(f.plots[0].id == "F1");
    REQUIRE(f.plots[0].observed_at.has_value());
    CHECK(*f.plots[0].observed_at == "2023-04-01T00:00:00Z");
}

TEST_CASE("dtb bins are half-open at 2.5 and 5") {
    CHECK(std::string(dtb_bin(1.0)) == "green");
    CHECK(std::string(dtb_bin(2.4999)) == "green");
    CHECK(std::string(dtb_bin(2.5)) == "yellow");
    CHECK(std::string(dtb_bin(4.9999)) == "yellow");
    CHECK(std::string(dtb_bin(5.0)) == "red");
    CHECK(std::string(dtb_bin(40.0)) == "red");
}

TEST_CASE("emit with include_dtb carries dtb_m and dtb_bin") {
    SurveyMap m = load_survey_map(collection({feature(square_deg(73.8, 18.5, 0.001), {{"plot_id", "A"}})}));
    std::map<std::string, double> dtb{{"A", 1.0}};
    EmitOptions eo;
    eo.include_dtb = true;
    eo.dtb = &dtb;
    json out = json::parse(emit_survey_map(m, eo));
    const json& props = out["features"][0]["properties"];
    CHECK(props["dtb_m"].get<double>() == Approx(1.0));
    CHECK(props["dtb_bin"].get<std::string>() == "green");
    CHECK(props["stage"].get<std::string>() == "M0");
}

TEST_CASE("load-emit-load round trip preserves ids, areas and coordinates") {
    json features = json::array();
    features.push_back(feature(square_deg(73.80, 18.50, 0.002), {{"plot_id", "A"}, {"legal_area_sqm", 5.0}}));
    features.push_back(feature(square_deg(73.81, 18.503, 0.001), {{"plot_id", "B"}}));
    SurveyMap m1 = load_survey_map(collection(features));
    const std::string emitted = emit_survey_map(m1);
    SurveyMap m2 = load_survey_map(emitted);

    REQUIRE(m2.plots.size() == m1.plots.size());
    for (size_t i = 0; i < m1.plots.size(); ++i) {
        CHECK(m2.plots[i].id == m1.plots[i].id);
        CHECK(area(m2.plots[i].shape) ==
              Approx(area(m1.plots[i].shape)).epsilon(1e-6));
    }
    // Coordinates survive within 1e-7 degrees.
    json in_fc = json::parse(collection(features));
    json out_fc = json::parse(emitted);
    for (size_t fi = 0; fi < 2; ++fi) {
        const json& a = in_fc["features"][fi]["geometry"]["coordinates"][0];
        const json& b = out_fc["features"][fi]["geometry"]["coordinates"][0];
        REQUIRE(a.size() == b.size());
        for (size_t k = 0; k < a.size(); ++k) {
            CHECK(b[k][0].get<double>() == Approx(a[k][0].get<double>()).margin(1e-7));
            CHECK(b[k][1].get<double>() == Approx(a[k][1].get<double>()).margin(1e-7));
        }
    }
}

TEST_CASE("projection is invertible within 50 km of the origin") {
    ProjectionSpec crs{18.5, 73.8};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50000.0, 50000.0);
    for (int i = 0; i < 200; ++i) {
        const Point2D p{u(rng), u(rng)};
        auto [lat, lng] = unproject(crs, p);
        CHECK(std::abs(lat) <= 90.0);
        // Round trip back to meters.
        const Point2D q = project(crs, lat, lng);
        CHECK(distance(p, q) < 1e-6);
        // And the degree-space round trip of the inverse itself.
        auto [lat2, lng2] = unproject(crs, q);
        CHECK(lat2 == Approx(lat).margin(1e-9));
        CHECK(lng2 == Approx(lng).margin(1e-9));
    }
}
