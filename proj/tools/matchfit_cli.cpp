// Batch front end: fixture generation, map reconciliation stages, panoptic
// evaluation and geospatial post-processing over GeoJSON.

#include <matchfit/matchfit.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matchfit;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAlgorithm = 3;

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path.string());  // mapped to exit 1
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw Error("cannot write " + path.string());
        os << bytes;
    }
    fs::rename(tmp, path);
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config file is not a JSON object: " + path);
    return j;
}

/// Config-file value wins over the built-in default, CLI flag wins over both.
template <class T>
void cfg(const CLI::App& app, const std::string& flag, const json& conf, const std::string& key, T& var) {
    const CLI::Option* opt = app.get_option(flag);
    if (opt && opt->count() > 0) return;
    if (conf.contains(key)) var = conf[key].get<T>();
}

struct StageStats {
    std::string stage;
    double ea_total = 0.0;
    std::map<std::string, double> dtb;
    int green = 0, yellow = 0, red = 0;
    double pct_dtb_lt_5m = 0.0;
};

StageStats stage_stats(const std::string& name, const SurveyMap& m, const FarmSet& f) {
    StageStats st;
    st.stage = name;
    ExcessAreaReport ea = excess_area_map(m, f);
    st.ea_total = ea.total;
    DtbReport d = dtb_map(m, f);
    st.dtb = d.per_plot;
    int lt5 = 0;
    for (const auto& [id, v] : d.per_plot) {
        const std::string bin = dtb_bin(v);
        if (bin == "green") ++st.green;
        else if (bin == "yellow") ++st.yellow;
        else ++st.red;
        if (v < 5.0) ++lt5;
    }
    st.pct_dtb_lt_5m = d.per_plot.empty() ? 0.0 : 100.0 * lt5 / d.per_plot.size();
    return st;
}

json stats_json(const StageStats& st) {
    return {{"stage", st.stage},
            {"ea_total_sqm", st.ea_total},
            {"bins", {{"green", st.green}, {"yellow", st.yellow}, {"red", st.red}}},
            {"pct_dtb_lt_5m", st.pct_dtb_lt_5m}};
}

int run(int argc, char** argv) {
    CLI::App app{"Land-record map reconciliation toolkit"};
    app.require_subcommand(1);

    // ---- gen-fixture ----
    auto* gen = app.add_subcommand("gen-fixture", "Generate a synthetic village (farm tiling + known perturbation)");
    std::string gen_out = "fixture";
    FixtureConfig fc;
    std::string perturb = "similarity";
    double theta_deg = 0.0;
    gen->add_option("--out-dir", gen_out, "Output directory");
    gen->add_option("--n-plots", fc.n_plots, "Number of plots")->capture_default_str();
    gen->add_option("--cell-m", fc.cell_m, "Nominal plot edge (m)")->capture_default_str();
    gen->add_option("--noise-m", fc.vertex_noise_m, "Per-vertex noise (m)")->capture_default_str();
    gen->add_option("--perturb", perturb, "none|similarity|tps|corner")->capture_default_str();
    gen->add_option("--tx", fc.transform.tx, "Similarity translation x (m)")->capture_default_str();
    gen->add_option("--ty", fc.transform.ty, "Similarity translation y (m)")->capture_default_str();
    gen->add_option("--theta-deg", theta_deg, "Similarity rotation (deg)")->capture_default_str();
    gen->add_option("--scale", fc.transform.s, "Similarity scale")->capture_default_str();
    gen->add_option("--tps-max-disp", fc.tps_max_disp_m, "TPS field amplitude (m)")->capture_default_str();
    gen->add_option("--seed", fc.seed, "RNG seed")->capture_default_str();

    // ---- matchfit ----
    auto* mf = app.add_subcommand("matchfit", "Run the reconciliation stages and emit maps + report");
    std::string mf_survey, mf_farms, mf_config, mf_out = "out";
    std::string stages = "jitterfit,splinefit";
    JitterOptions jopts;
    SplineFitConfig scfg;
    FaceFitConfig ffcfg;
    double partition_spacing = 1.0;
    std::uint64_t mf_seed = 1;
    mf->add_option("--survey", mf_survey, "Survey map GeoJSON")->required();
    mf->add_option("--farms", mf_farms, "Farm plots GeoJSON")->required();
    mf->add_option("--config", mf_config, "JSON config file");
    mf->add_option("--out-dir", mf_out, "Output directory")->capture_default_str();
    mf->add_option("--stages", stages, "Comma list of jitterfit,splinefit,facefit")->capture_default_str();
    mf->add_option("--seed", mf_seed, "Seed")->capture_default_str();
    mf->add_option("--txy-max", jopts.bounds.txy_max, "Map-level translation bound (m)")->capture_default_str();
    mf->add_option("--theta-max", jopts.bounds.theta_max, "Map-level rotation bound (rad)")->capture_default_str();
    mf->add_option("--s-min", jopts.bounds.s_min, "Scale lower bound")->capture_default_str();
    mf->add_option("--s-max", jopts.bounds.s_max, "Scale upper bound")->capture_default_str();
    mf->add_option("--anchor-dtb-max", scfg.anchor_dtb_max, "Anchor candidate dtb cutoff (m)")->capture_default_str();
    mf->add_option("--k-anchors", scfg.k_anchors, "Anchor count")->capture_default_str();
    mf->add_option("--epsilon-m", scfg.epsilon_m, "Warp distance-to-identity bound (m)")->capture_default_str();
    mf->add_option("--tps-lambda", scfg.tps_lambda, "TPS regularization")->capture_default_str();
    mf->add_option("--shape-bound-coeff", scfg.shape_bound_coeff, "Shape bound coefficient")->capture_default_str();

    // ---- facefit ----
    auto* ff = app.add_subcommand("facefit", "Voronoi farm partition + corner snapping");
    std::string ff_survey, ff_farms, ff_config, ff_out = "out";
    ff->add_option("--survey", ff_survey, "Survey map GeoJSON")->required();
    ff->add_option("--farms", ff_farms, "Farm plots GeoJSON")->required();
    ff->add_option("--config", ff_config, "JSON config file");
    ff->add_option("--out-dir", ff_out, "Output directory")->capture_default_str();
    ff->add_option("--corner-angle-min-deg", ffcfg.corner_angle_min_deg)->capture_default_str();
    ff->add_option("--snap-radius-m", ffcfg.snap_radius_m)->capture_default_str();
    ff->add_option("--beam-width", ffcfg.beam_width)->capture_default_str();
    ff->add_option("--candidates-per-corner", ffcfg.candidates_per_corner)->capture_default_str();
    ff->add_option("--sample-spacing", partition_spacing, "Voronoi boundary sample spacing (m)")->capture_default_str();

    // ---- segeval ----
    auto* se = app.add_subcommand("segeval", "Panoptic evaluation of predicted vs ground-truth instances");
    std::string se_gt, se_pred, se_out;
    double overlap = 0.10;
    se->add_option("--gt", se_gt, "Ground-truth GeoJSON")->required();
    se->add_option("--pred", se_pred, "Predicted GeoJSON")->required();
    se->add_option("--overlap", overlap, "Matching overlap fraction of gt")->capture_default_str();
    se->add_option("--out", se_out, "Write report here instead of stdout");

    // ---- pipeline ----
    auto* pl = app.add_subcommand("pipeline", "Dagger removal, de-dup, Plus-code IDs, cell sharding");
    std::string pl_in, pl_config, pl_out = "shards", deny_path;
    PipelineConfig pcfg;
    pl->add_option("--input", pl_in, "Detections GeoJSON")->required();
    pl->add_option("--config", pl_config, "JSON config file");
    pl->add_option("--out-dir", pl_out, "Shard output directory")->capture_default_str();
    pl->add_option("--iou-thresh", pcfg.iou_thresh)->capture_default_str();
    pl->add_option("--spike-angle-max-deg", pcfg.spike_angle_max_deg)->capture_default_str();
    pl->add_option("--area-tol-frac", pcfg.area_tol_frac)->capture_default_str();
    pl->add_option("--cell-level", pcfg.cell_level)->capture_default_str();
    pl->add_option("--deny-cells", deny_path, "File with one cell token per line");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        if (perturb == "none") fc.perturb = FixtureConfig::Perturb::None;
        else if (perturb == "similarity") fc.perturb = FixtureConfig::Perturb::Similarity;
        else if (perturb == "tps") fc.perturb = FixtureConfig::Perturb::Tps;
        else if (perturb == "corner") fc.perturb = FixtureConfig::Perturb::Corner;
        else throw ConfigError("unknown perturbation: " + perturb);
        fc.transform.theta = theta_deg * M_PI / 180.0;
        Fixture fx = gen_fixture(fc);
        write_file(fs::path(gen_out) / "survey.geojson", emit_survey_map(fx.survey));
        write_file(fs::path(gen_out) / "farms.geojson", emit_farm_set(fx.farms));
        std::cout << "wrote " << gen_out << "/survey.geojson and farms.geojson\n";
        return 0;
    }

    if (mf->parsed()) {
        json conf = load_config(mf_config);
        cfg(*mf, "--stages", conf, "stages", stages);
        cfg(*mf, "--txy-max", conf, "txy_max", jopts.bounds.txy_max);
        cfg(*mf, "--theta-max", conf, "theta_max", jopts.bounds.theta_max);
        cfg(*mf, "--s-min", conf, "s_min", jopts.bounds.s_min);
        cfg(*mf, "--s-max", conf, "s_max", jopts.bounds.s_max);
        cfg(*mf, "--anchor-dtb-max", conf, "anchor_dtb_max", scfg.anchor_dtb_max);
        cfg(*mf, "--k-anchors", conf, "k_anchors", scfg.k_anchors);
        cfg(*mf, "--epsilon-m", conf, "epsilon_m", scfg.epsilon_m);
        cfg(*mf, "--tps-lambda", conf, "tps_lambda", scfg.tps_lambda);
        cfg(*mf, "--shape-bound-coeff", conf, "shape_bound_coeff", scfg.shape_bound_coeff);
        jopts.seed = mf_seed;

        const std::string survey_bytes = read_file(mf_survey);
        const std::string farm_bytes = read_file(mf_farms);
        std::vector<std::string> warnings;
        SurveyMap m = load_survey_map(survey_bytes, std::nullopt, &warnings);
        FarmSet f = load_farm_set(farm_bytes, m.crs, &warnings);  // shared planar frame
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

        json report = {{"schema", 1}, {"seed", mf_seed}};
        json stage_list = json::array();
        std::vector<StageStats> all_stats;
        all_stats.push_back(stage_stats("input", m, f));
        report["input"] = stats_json(all_stats.front());

        std::map<std::string, double> dtb_before = all_stats.front().dtb;

        std::stringstream ss(stages);
        std::string stage;
        SurveyMap cur = m;
        while (std::getline(ss, stage, ',')) {
            if (stage.empty()) continue;
            if (stage == "jitterfit") {
                auto [fit, m1] = jitterfit_map(cur, f, jopts);
                cur = std::move(m1);
                StageStats st = stage_stats("M1", cur, f);
                json sj = stats_json(st);
                sj["transform"] = {{"tx", fit.transform.tx},
                                   {"ty", fit.transform.ty},
                                   {"theta", fit.transform.theta},
                                   {"s", fit.transform.s}};
                sj["objective_before"] = fit.objective_before;
                sj["objective_after"] = fit.objective_after;
                sj["evaluations"] = fit.evaluations;
                stage_list.push_back(sj);
                all_stats.push_back(st);
                EmitOptions eo{true, &st.dtb, nullptr};
                write_file(fs::path(mf_out) / "m1.geojson", emit_survey_map(cur, eo));
            } else if (stage == "splinefit") {
                RefitMap refit = refit_all_plots(cur, f);
                AnchorSet anchors = select_anchors(cur, refit, scfg.k_anchors, scfg.anchor_dtb_max);
                WarpField w = fit_warp(cur, anchors, refit, scfg.epsilon_m, scfg.tps_lambda);
                WarpApplyResult res = apply_warp(cur, w, scfg);
                cur = std::move(res.map);
                StageStats st = stage_stats("M2", cur, f);
                json sj = stats_json(st);
                sj["anchors"] = json(anchors.indices);
                sj["warp_gain"] = res.gain;
                sj["damping_rounds"] = res.damping_rounds;
                stage_list.push_back(sj);
                all_stats.push_back(st);
                EmitOptions eo{true, &st.dtb, nullptr};
                write_file(fs::path(mf_out) / "m2.geojson", emit_survey_map(cur, eo));
            } else if (stage == "facefit") {
                BoundingBox bb = bounds(cur);
                bb.expand(bounds(f));
                const double margin = 50.0;
                bb.min_x -= margin; bb.min_y -= margin; bb.max_x += margin; bb.max_y += margin;
                FarmPartitionConfig pc;
                pc.sample_spacing = partition_spacing;
                pc.corner_angle_min_deg = ffcfg.corner_angle_min_deg;
                FarmPartition part = build_farm_partition(f, bb, pc);
                auto [snapped, snaps] = facefit_map(cur, part, f, ffcfg);
                cur = std::move(snapped);
                StageStats st = stage_stats("facefit", cur, f);
                json sj = stats_json(st);
                json snap_j = json::array();
                for (const auto& s : snaps)
                    snap_j.push_back({{"plot_id", s.plot_id},
                                      {"snapped", !s.mapping.empty()},
                                      {"ea_before", s.ea_before},
                                      {"ea_after", s.ea_after},
                                      {"area_change_frac", s.area_change_frac}});
                sj["snaps"] = snap_j;
                stage_list.push_back(sj);
                all_stats.push_back(st);
                EmitOptions eo{true, &st.dtb, nullptr};
                write_file(fs::path(mf_out) / "facefit.geojson", emit_survey_map(cur, eo));
            } else {
                throw ConfigError("unknown stage: " + stage);
            }
        }
        report["stages"] = stage_list;

        const std::map<std::string, double>& dtb_after = all_stats.back().dtb;
        json per_plot = json::object();
        for (const auto& [id, before] : dtb_before) {
            auto it = dtb_after.find(id);
            per_plot[id] = {{"dtb_before_m", before},
                            {"dtb_after_m", it != dtb_after.end() ? it->second : before}};
        }
        report["per_plot"] = per_plot;
        report["output"] = stats_json(all_stats.back());
        write_file(fs::path(mf_out) / "report.json", report.dump(2) + "\n");
        std::cout << "pct_dtb_lt_5m: input " << all_stats.front().pct_dtb_lt_5m << " -> output "
                  << all_stats.back().pct_dtb_lt_5m << "\n";
        return 0;
    }

    if (ff->parsed()) {
        json conf = load_config(ff_config);
        cfg(*ff, "--corner-angle-min-deg", conf, "corner_angle_min_deg", ffcfg.corner_angle_min_deg);
        cfg(*ff, "--snap-radius-m", conf, "snap_radius_m", ffcfg.snap_radius_m);
        cfg(*ff, "--beam-width", conf, "beam_width", ffcfg.beam_width);
        cfg(*ff, "--candidates-per-corner", conf, "candidates_per_corner", ffcfg.candidates_per_corner);
        cfg(*ff, "--sample-spacing", conf, "sample_spacing", partition_spacing);

        SurveyMap m = load_survey_map(read_file(ff_survey));
        FarmSet f = load_farm_set(read_file(ff_farms), m.crs);
        BoundingBox bb = bounds(m);
        bb.expand(bounds(f));
        bb.min_x -= 50; bb.min_y -= 50; bb.max_x += 50; bb.max_y += 50;
        FarmPartitionConfig pc;
        pc.sample_spacing = partition_spacing;
        pc.corner_angle_min_deg = ffcfg.corner_angle_min_deg;
        FarmPartition part = build_farm_partition(f, bb, pc);
        auto [snapped, snaps] = facefit_map(m, part, f, ffcfg);

        json snap_j = json::array();
        for (const auto& s : snaps)
            snap_j.push_back({{"plot_id", s.plot_id},
                              {"snapped", !s.mapping.empty()},
                              {"ea_before", s.ea_before},
                              {"ea_after", s.ea_after},
                              {"area_change_frac", s.area_change_frac}});
        write_file(fs::path(ff_out) / "facefit.geojson", emit_survey_map(snapped));
        write_file(fs::path(ff_out) / "report.json",
                   json({{"schema", 1}, {"snaps", snap_j}}).dump(2) + "\n");
        return 0;
    }

    if (se->parsed()) {
        InstanceSet gt = load_instances(read_file(se_gt));
        // Pred must share gt's frame; reuse the gt collection's projection.
        ProjectionSpec crs = geojson::default_projection(geojson::parse(read_file(se_gt)));
        gt = load_instances(read_file(se_gt), crs);
        InstanceSet pred = load_instances(read_file(se_pred), crs);
        SegEvalReport rep = evaluate(gt, pred, overlap);
        json out = {{"schema", 1}, {"overlap_frac", rep.overlap_frac}};
        json classes = json::object();
        for (const auto& [cls, m] : rep.per_class) {
            classes[cls] = {{"mean_iou", m.mean_iou},
                            {"median_iou", m.median_iou},
                            {"over_seg", m.over_seg.value},
                            {"over_seg_defined", m.over_seg.defined},
                            {"under_seg", m.under_seg.value},
                            {"under_seg_defined", m.under_seg.defined},
                            {"fnr_percent", m.fnr_percent},
                            {"fpr_percent", m.fpr_percent.value},
                            {"fpr_defined", m.fpr_percent.defined},
                            {"total_gt", m.total_gt},
                            {"total_pred", m.total_pred}};
        }
        out["per_class"] = classes;
        const std::string text = out.dump(2) + "\n";
        if (se_out.empty())
            std::cout << text;
        else
            write_file(se_out, text);
        return 0;
    }

    if (pl->parsed()) {
        json conf = load_config(pl_config);
        cfg(*pl, "--iou-thresh", conf, "iou_thresh", pcfg.iou_thresh);
        cfg(*pl, "--spike-angle-max-deg", conf, "spike_angle_max_deg", pcfg.spike_angle_max_deg);
        cfg(*pl, "--area-tol-frac", conf, "area_tol_frac", pcfg.area_tol_frac);
        cfg(*pl, "--cell-level", conf, "cell_level", pcfg.cell_level);
        cfg(*pl, "--deny-cells", conf, "deny_cells_path", deny_path);
        if (!deny_path.empty()) {
            std::istringstream is(read_file(deny_path));
            std::string line;
            while (std::getline(is, line))
                if (!line.empty()) pcfg.deny_cells.insert(line);
        }

        ProjectionSpec crs;
        std::vector<Detection> dets = load_detections(read_file(pl_in), crs);
        for (Detection& d : dets)
            d.shape = dagger_removal(d.shape, pcfg.spike_angle_max_deg, pcfg.area_tol_frac,
                                     pcfg.simplify_tol_m);
        dets = dedup(dets, pcfg.iou_thresh);
        std::vector<std::string> ids = assign_plus_code_ids(dets, crs);
        std::vector<CellShard> shards = shard_by_cells(dets, crs, pcfg.cell_level);
        emit_shards(dets, ids, shards, crs, pl_out, pcfg.deny_cells);

        json summary = {{"schema", 1},
                        {"features_out", dets.size()},
                        {"shards", shards.size()}};
        write_file(fs::path(pl_out) / "summary.json", summary.dump(2) + "\n");
        std::cout << dets.size() << " features in " << shards.size() << " shards\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const UnsupportedGeometry& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        // IO-path failures mention a path; everything else is algorithmic.
        const std::string msg = e.what();
        if (msg.rfind("cannot read", 0) == 0 || msg.rfind("cannot write", 0) == 0) {
            std::cerr << "io error: " << msg << "\n";
            return kExitIo;
        }
        std::cerr << "error: " << msg << "\n";
        return kExitAlgorithm;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAlgorithm;
    }
}
