#pragma once

#include <matchfit/errors.hpp>
#include <matchfit/geom.hpp>

#include <json.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matchfit {

/// Local planar frame: spherical transverse Mercator about a village-scale origin.
struct ProjectionSpec {
    double origin_lat = 0.0;  // degrees
    double origin_lng = 0.0;  // degrees
    enum class Kind { LocalTransverseMercator } kind = Kind::LocalTransverseMercator;
};

namespace detail {
constexpr double kEarthRadius = 6378137.0;  // m
constexpr double kDegToRad = M_PI / 180.0;
}  // namespace detail

inline Point2D project(const ProjectionSpec& crs, double lat_deg, double lng_deg) {
    const double phi = lat_deg * detail::kDegToRad;
    const double dlam = (lng_deg - crs.origin_lng) * detail::kDegToRad;
    const double phi0 = crs.origin_lat * detail::kDegToRad;
    const double b = std::cos(phi) * std::sin(dlam);
    const double x = detail::kEarthRadius * std::atanh(b);
    const double y = detail::kEarthRadius * (std::atan2(std::tan(phi), std::cos(dlam)) - phi0);
    return {x, y};
}

/// Inverse of project(); (lat, lng) in degrees.
inline std::pair<double, double> unproject(const ProjectionSpec& crs, Point2D p) {
    const double phi0 = crs.origin_lat * detail::kDegToRad;
    const double d = p.y / detail::kEarthRadius + phi0;
    const double xr = p.x / detail::kEarthRadius;
    const double phi = std::asin(std::sin(d) / std::cosh(xr));
    const double dlam = std::atan2(std::sinh(xr), std::cos(d));
    return {phi / detail::kDegToRad, crs.origin_lng + dlam / detail::kDegToRad};
}

enum class MapStage { M0, M1, M2 };

inline const char* stage_name(MapStage s) {
    switch (s) {
        case MapStage::M0: return "M0";
        case MapStage::M1: return "M1";
        case MapStage::M2: return "M2";
    }
    return "M0";
}

struct SurveyPlot {
    std::string id;
    Polygon shape;
    std::optional<double> legal_area_sqm;
};

struct SurveyMap {
    std::vector<SurveyPlot> plots;
    MapStage stage = MapStage::M0;
    ProjectionSpec crs;
};

struct FarmPlot {
    std::string id;
    Polygon shape;
    std::optional<std::string> observed_at;  // ISO-8601
};

struct FarmSet {
    std::vector<FarmPlot> plots;
    ProjectionSpec crs;
};

inline BoundingBox bounds(const SurveyMap& m) {
    BoundingBox b;
    for (const auto& p : m.plots) b.expand(bounds(p.shape));
    return b;
}

inline BoundingBox bounds(const FarmSet& f) {
    BoundingBox b;
    for (const auto& p : f.plots) b.expand(bounds(p.shape));
    return b;
}

// ---------------------------------------------------------------------------
// GeoJSON
// ---------------------------------------------------------------------------

namespace geojson {

using nlohmann::json;

inline json parse(const std::string& bytes) {
    json j = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("invalid JSON");
    return j;
}

/// WGS84 bbox center of every polygonal coordinate in a FeatureCollection.
inline ProjectionSpec default_projection(const json& fc) {
    double min_lat = 90, max_lat = -90, min_lng = 180, max_lng = -180;
    bool any = false;
    std::function<void(const json&)> scan = [&](const json& coords) {
        if (coords.is_array() && coords.size() >= 2 && coords[0].is_number()) {
            any = true;
            const double lng = coords[0].get<double>();
            const double lat = coords[1].get<double>();
            min_lat = std::min(min_lat, lat);
            max_lat = std::max(max_lat, lat);
            min_lng = std::min(min_lng, lng);
            max_lng = std::max(max_lng, lng);
        } else if (coords.is_array()) {
            for (const auto& c : coords) scan(c);
        }
    };
    if (fc.contains("features"))
        for (const auto& f : fc["features"])
            if (f.contains("geometry") && f["geometry"].is_object() && f["geometry"].contains("coordinates"))
                scan(f["geometry"]["coordinates"]);
    ProjectionSpec crs;
    if (any) {
        crs.origin_lat = (min_lat + max_lat) / 2.0;
        crs.origin_lng = (min_lng + max_lng) / 2.0;
    }
    return crs;
}

inline Ring parse_ring(const json& jring, const ProjectionSpec& crs) {
    Ring r;
    for (const auto& c : jring) {
        if (!c.is_array() || c.size() < 2) throw ParseError("malformed coordinate");
        r.push_back(project(crs, c[1].get<double>(), c[0].get<double>()));
    }
    return r;
}

/// One Polygon per MultiPolygon part.
inline std::vector<Polygon> parse_polygons(const json& geom, const ProjectionSpec& crs,
                                           size_t feature_index) {
    if (!geom.is_object() || !geom.contains("type"))
        throw UnsupportedGeometry("feature " + std::to_string(feature_index) + ": missing geometry type");
    const std::string type = geom["type"].get<std::string>();
    std::vector<Polygon> out;
    auto parse_one = [&](const json& rings) {
        Ring exterior = parse_ring(rings.at(0), crs);
        std::vector<Ring> holes;
        for (size_t i = 1; i < rings.size(); ++i) holes.push_back(parse_ring(rings[i], crs));
        out.push_back(make_polygon(std::move(exterior), std::move(holes)));
    };
    if (type == "Polygon") {
        parse_one(geom["coordinates"]);
    } else if (type == "MultiPolygon") {
        for (const auto& part : geom["coordinates"]) parse_one(part);
    } else {
        throw UnsupportedGeometry("feature " + std::to_string(feature_index) +
                                  ": unsupported geometry type " + type);
    }
    return out;
}

inline json ring_to_coords(const Ring& r, const ProjectionSpec& crs, bool reverse = false) {
    json arr = json::array();
    Ring ring = r;
    if (reverse) std::reverse(ring.begin(), ring.end());
    ring.push_back(ring.front());  // GeoJSON rings are explicitly closed
    for (const Point2D& p : ring) {
        auto [lat, lng] = unproject(crs, p);
        arr.push_back({lng, lat});
    }
    return arr;
}

inline json polygon_to_geometry(const Polygon& p, const ProjectionSpec& crs) {
    json coords = json::array();
    coords.push_back(ring_to_coords(p.exterior, crs));
    for (const Ring& h : p.holes) coords.push_back(ring_to_coords(h, crs));
    return {{"type", "Polygon"}, {"coordinates", coords}};
}

inline json multipolygon_to_geometry(const MultiPolygon& mp, const ProjectionSpec& crs) {
    if (mp.parts.size() == 1) return polygon_to_geometry(mp.parts[0], crs);
    json coords = json::array();
    for (const Polygon& p : mp.parts) {
        json part = json::array();
        part.push_back(ring_to_coords(p.exterior, crs));
        for (const Ring& h : p.holes) part.push_back(ring_to_coords(h, crs));
        coords.push_back(part);
    }
    return {{"type", "MultiPolygon"}, {"coordinates", coords}};
}

}  // namespace geojson

struct LoadedFeature {
    std::string id;
    Polygon shape;
    nlohmann::json properties;
};

namespace detail {

inline std::vector<LoadedFeature> load_features(const std::string& bytes,
                                                const std::optional<ProjectionSpec>& crs_in,
                                                ProjectionSpec& crs_out,
                                                std::vector<std::string>* warnings) {
    using nlohmann::json;
    json fc = geojson::parse(bytes);
    if (!fc.is_object() || fc.value("type", "") != "FeatureCollection")
        throw ParseError("expected a GeoJSON FeatureCollection");
    crs_out = crs_in ? *crs_in : geojson::default_projection(fc);

    std::vector<LoadedFeature> out;
    const json& features = fc.contains("features") ? fc["features"] : json::array();
    for (size_t i = 0; i < features.size(); ++i) {
        const json& f = features[i];
        json props = f.contains("properties") && f["properties"].is_object() ? f["properties"]
                                                                             : json::object();
        std::string id;
        if (props.contains("plot_id"))
            id = props["plot_id"].is_string() ? props["plot_id"].get<std::string>()
                                             : props["plot_id"].dump();
        else if (f.contains("id"))
            id = f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();
        if (id.empty()) {
            id = "feature-" + std::to_string(i);
            if (warnings) warnings->push_back("feature " + std::to_string(i) + ": missing plot_id, using " + id);
        }
        std::vector<Polygon> polys = geojson::parse_polygons(f.at("geometry"), crs_out, i);
        if (polys.size() == 1) {
            out.push_back({id, std::move(polys[0]), props});
        } else {
            for (size_t k = 0; k < polys.size(); ++k)
                out.push_back({id + "#" + std::to_string(k + 1), std::move(polys[k]), props});
        }
    }
    return out;
}

}  // namespace detail

inline SurveyMap load_survey_map(const std::string& bytes,
                                 std::optional<ProjectionSpec> crs = std::nullopt,
                                 std::vector<std::string>* warnings = nullptr) {
    SurveyMap m;
    auto features = detail::load_features(bytes, crs, m.crs, warnings);
    for (auto& f : features) {
        SurveyPlot p;
        p.id = std::move(f.id);
        p.shape = std::move(f.shape);
        if (f.properties.contains("legal_area_sqm") && f.properties["legal_area_sqm"].is_number())
            p.legal_area_sqm = f.properties["legal_area_sqm"].get<double>();
        m.plots.push_back(std::move(p));
    }
    return m;
}

inline FarmSet load_farm_set(const std::string& bytes,
                             std::optional<ProjectionSpec> crs = std::nullopt,
                             std::vector<std::string>* warnings = nullptr) {
    FarmSet fs;
    auto features = detail::load_features(bytes, crs, fs.crs, warnings);
    for (auto& f : features) {
        FarmPlot p;
        p.id = std::move(f.id);
        p.shape = std::move(f.shape);
        if (f.properties.contains("observed_at") && f.properties["observed_at"].is_string())
            p.observed_at = f.properties["observed_at"].get<std::string>();
        fs.plots.push_back(std::move(p));
    }
    return fs;
}

inline const char* dtb_bin(double dtb_m) {
    // Half-open bins: [0, 2.5) green, [2.5, 5) yellow, [5, inf) red.
    if (dtb_m < 2.5) return "green";
    if (dtb_m < 5.0) return "yellow";
    return "red";
}

struct EmitOptions {
    bool include_dtb = false;
    const std::map<std::string, double>* dtb = nullptr;          // plot-id -> meters
    const std::map<std::string, double>* excess_area = nullptr;  // plot-id -> m^2
};

inline std::string emit_survey_map(const SurveyMap& m, const EmitOptions& opts = {}) {
    using nlohmann::json;
    json features = json::array();
    for (const auto& p : m.plots) {
        json props = {{"plot_id", p.id}, {"stage", stage_name(m.stage)}};
        if (p.legal_area_sqm) props["legal_area_sqm"] = *p.legal_area_sqm;
        if (opts.include_dtb && opts.dtb) {
            auto it = opts.dtb->find(p.id);
            if (it != opts.dtb->end()) {
                props["dtb_m"] = it->second;
                props["dtb_bin"] = dtb_bin(it->second);
            }
        }
        if (opts.excess_area) {
            auto it = opts.excess_area->find(p.id);
            if (it != opts.excess_area->end()) props["excess_area_sqm"] = it->second;
        }
        features.push_back({{"type", "Feature"},
                            {"properties", props},
                            {"geometry", geojson::polygon_to_geometry(p.shape, m.crs)}});
    }
    json fc = {{"type", "FeatureCollection"}, {"features", features}};
    return fc.dump(2) + "\n";
}

inline std::string emit_farm_set(const FarmSet& f) {
    using nlohmann::json;
    json features = json::array();
    for (const auto& p : f.plots) {
        json props = {{"plot_id", p.id}};
        if (p.observed_at) props["observed_at"] = *p.observed_at;
        features.push_back({{"type", "Feature"},
                            {"properties", props},
                            {"geometry", geojson::polygon_to_geometry(p.shape, f.crs)}});
    }
    json fc = {{"type", "FeatureCollection"}, {"features", features}};
    return fc.dump(2) + "\n";
}

}  // namespace matchfit
