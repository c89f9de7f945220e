#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harvest/clustering.hpp"
#include "harvest/io.hpp"
#include "harvest/phenotyping.hpp"
#include "harvest/planning.hpp"
#include "harvest/pose.hpp"
#include "harvest/sim.hpp"

namespace {

using namespace harvest;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw ParseError(out_path + ": cannot open for writing");
    out << text;
}

// Detection-to-phenotype pipeline: 2D association, one shared clustering
// pass over the union of truss boxes, 3D disambiguation, phenotype build.
std::vector<pheno::TrussPhenotype> run_phenotype_pipeline(
    const std::vector<pheno::Detection>& detections, const geom::PointCloud& cloud,
    const geom::CameraIntrinsics& K, const cluster::ClusterParams& params, double iou_min) {
    std::vector<pheno::Detection> fruits, trusses;
    for (const auto& d : detections)
        (d.cls == pheno::DetectionClass::Fruit ? fruits : trusses).push_back(d);
    if (trusses.empty()) throw DomainError("phenotype: no truss detections");
    if (fruits.empty()) throw DomainError("phenotype: no fruit detections");

    auto assignments = pheno::associate_fruits_2d(fruits, trusses, iou_min);

    cluster::BBox roi = trusses.front().bbox;
    for (const auto& t : trusses) {
        roi.x_min = std::min(roi.x_min, t.bbox.x_min);
        roi.y_min = std::min(roi.y_min, t.bbox.y_min);
        roi.x_max = std::max(roi.x_max, t.bbox.x_max);
        roi.y_max = std::max(roi.y_max, t.bbox.y_max);
    }
    std::vector<Pixel> seeds;
    for (const auto& f : fruits) seeds.push_back(f.bbox.center());
    auto clusters = cluster::adaptive_dbscan(cloud, roi, seeds, params);
    auto depth_order = cluster::split_foreground_background(clusters, cloud);
    auto cluster_depth = [&](int cid) {
        for (const auto& cd : depth_order)
            if (cd.cluster_id == cid) return cd.median_z;
        return 0.0;
    };

    // Anchors: clusters of fruits already uniquely assigned per truss.
    std::vector<pheno::TrussClusterInfo> truss_info;
    for (const auto& t : trusses) {
        pheno::TrussClusterInfo info;
        info.truss_id = t.id;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i].state != pheno::AssignState::Assigned) continue;
            if (assignments[i].truss_id != t.id) continue;
            int cid = clusters.seed_assignments[i];
            if (cid >= 0) info.anchor_cluster_ids.push_back(cid);
        }
        if (!info.anchor_cluster_ids.empty())
            info.cluster_median_depth = cluster_depth(info.anchor_cluster_ids.front());
        truss_info.push_back(info);
    }

    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i].state != pheno::AssignState::Ambiguous) continue;
        std::vector<pheno::TrussClusterInfo> candidates;
        for (int tid : assignments[i].candidates)
            for (const auto& info : truss_info)
                if (info.truss_id == tid) candidates.push_back(info);
        auto seed = cluster::seed_point_lookup(seeds[i], cloud, static_cast<int>(params.seed_window));
        double depth = seed ? seed->z : 0.0;
        auto owner = pheno::disambiguate_3d(clusters.seed_assignments[i], depth, candidates);
        if (owner) {
            assignments[i].state = pheno::AssignState::Assigned;
            assignments[i].truss_id = *owner;
        }
    }

    auto depth_at = [&](const Pixel& px) -> std::optional<double> {
        auto p = cluster::seed_point_lookup(px, cloud, params.seed_window);
        if (!p) return std::nullopt;
        return p->z;
    };
    std::vector<pheno::TrussPhenotype> out;
    for (const auto& t : trusses) {
        std::vector<pheno::Detection> members;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i].state == pheno::AssignState::Assigned &&
                assignments[i].truss_id == t.id)
                members.push_back(fruits[i]);
        if (members.empty()) {
            std::cerr << "warning: truss " << t.id << " has no assigned fruits, skipped\n";
            continue;
        }
        out.push_back(pheno::build_phenotype(t, members, depth_at, nullptr, K));
    }
    return out;
}

std::string render_report(const sim::Report& report, const std::string& format) {
    if (format == "md") return sim::render_markdown(report);
    if (format == "csv") return sim::render_csv(report);
    return io::report_to_json(report);
}

int run(int argc, char** argv) {
    CLI::App app{"Truss-harvest perception and planning toolkit"};
    app.require_subcommand(1);

    // phenotype
    auto* cmd_ph = app.add_subcommand("phenotype", "Detections + cloud -> truss phenotypes");
    std::string ph_det, ph_cloud, ph_intr, ph_out;
    double ph_eps = 0.03, ph_iou = 0.5;
    int ph_minpts = 8, ph_window = 2;
    double ph_margin = 0.0;
    cmd_ph->add_option("--detections", ph_det)->required();
    cmd_ph->add_option("--cloud", ph_cloud)->required();
    cmd_ph->add_option("--intrinsics", ph_intr)->required();
    cmd_ph->add_option("--eps", ph_eps);
    cmd_ph->add_option("--min-pts", ph_minpts);
    cmd_ph->add_option("--crop-margin", ph_margin);
    cmd_ph->add_option("--seed-window", ph_window);
    cmd_ph->add_option("--iou-min", ph_iou);
    cmd_ph->add_option("--out", ph_out);

    // pose-eval
    auto* cmd_pe = app.add_subcommand("pose-eval", "Keypoint accuracy at an OKS threshold");
    std::string pe_pred, pe_gt, pe_sigmas, pe_out;
    double pe_thr = 0.75;
    cmd_pe->add_option("--pred", pe_pred)->required();
    cmd_pe->add_option("--gt", pe_gt)->required();
    cmd_pe->add_option("--sigmas", pe_sigmas)->required();
    cmd_pe->add_option("--threshold", pe_thr);
    cmd_pe->add_option("--out", pe_out);

    // sigmas
    auto* cmd_sg = app.add_subcommand("sigmas", "Estimate sigmas from annotator variance");
    std::string sg_ann, sg_exp, sg_mult, sg_out;
    double sg_default = -1.0;
    cmd_sg->add_option("--annotators", sg_ann)->required();
    cmd_sg->add_option("--expert", sg_exp)->required();
    cmd_sg->add_option("--multipliers", sg_mult);
    cmd_sg->add_option("--default", sg_default, "Fallback sigma for unestimable slots");
    cmd_sg->add_option("--out", sg_out);

    // plan
    auto* cmd_pl = app.add_subcommand("plan", "Wrap trajectory from a 3D pose");
    std::string pl_pose, pl_spheres, pl_eff, pl_out;
    double pl_clearance = 0.005, pl_step = 0.01, pl_maxstep = 0.05;
    int pl_iters = 10;
    cmd_pl->add_option("--pose", pl_pose)->required();
    cmd_pl->add_option("--spheres", pl_spheres)->required();
    cmd_pl->add_option("--effector", pl_eff)->required();
    cmd_pl->add_option("--clearance", pl_clearance);
    cmd_pl->add_option("--shift-step", pl_step);
    cmd_pl->add_option("--shift-max-iters", pl_iters);
    cmd_pl->add_option("--max-step", pl_maxstep);
    cmd_pl->add_option("--out", pl_out);

    // simulate
    auto* cmd_sim = app.add_subcommand("simulate", "Synthetic harvest episodes + report");
    std::uint64_t sim_seed = 0;
    int sim_episodes = 15;
    std::string sim_noise, sim_policy, sim_format = "md", sim_out, sim_records_out;
    double sim_ripe = 0.9;
    cmd_sim->add_option("--seed", sim_seed)->required();
    cmd_sim->add_option("--episodes", sim_episodes)->required();
    cmd_sim->add_option("--noise", sim_noise)->required();
    cmd_sim->add_option("--policy", sim_policy);
    cmd_sim->add_option("--ripe-fraction", sim_ripe);
    cmd_sim->add_option("--format", sim_format)->check(CLI::IsMember({"md", "csv", "json"}));
    cmd_sim->add_option("--out", sim_out);
    cmd_sim->add_option("--records-out", sim_records_out);

    // report
    auto* cmd_rep = app.add_subcommand("report", "Aggregate episode records into a table");
    std::string rep_records, rep_format = "md", rep_out;
    cmd_rep->add_option("--records", rep_records)->required();
    cmd_rep->add_option("--format", rep_format)->check(CLI::IsMember({"md", "csv", "json"}));
    cmd_rep->add_option("--out", rep_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (cmd_ph->parsed()) {
        cluster::ClusterParams params;
        params.eps = ph_eps;
        params.min_pts = ph_minpts;
        params.crop_margin = ph_margin;
        params.seed_window = ph_window;
        auto phenotypes =
            run_phenotype_pipeline(io::load_detections(ph_det), io::load_cloud(ph_cloud),
                                   io::load_intrinsics(ph_intr), params, ph_iou);
        write_output(io::phenotypes_to_json(phenotypes), ph_out);
    } else if (cmd_pe->parsed()) {
        double acc = pose::accuracy_at(io::load_keypoint_annotations(pe_pred),
                                       io::load_keypoint_annotations(pe_gt),
                                       io::load_sigmas(pe_sigmas), pe_thr);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "{\"threshold\": %g, \"accuracy\": %.6f}\n", pe_thr, acc);
        write_output(buf, pe_out);
    } else if (cmd_sg->parsed()) {
        auto est = pose::estimate_sigmas(io::load_annotator_sets(sg_ann),
                                         io::load_keypoint_annotations(sg_exp));
        std::array<double, pose::kNumKeypoints> raw;
        std::string out = "[";
        bool complete = true;
        for (int i = 0; i < pose::kNumKeypoints; ++i) {
            double v;
            if (est.sigma[i]) v = *est.sigma[i];
            else if (sg_default > 0) v = sg_default;
            else { complete = false; v = 0; }
            raw[i] = v;
        }
        if (!complete && sg_mult.empty()) {
            for (int i = 0; i < pose::kNumKeypoints; ++i) {
                out += (est.sigma[i] ? std::to_string(*est.sigma[i]) : "null");
                out += i + 1 < pose::kNumKeypoints ? ", " : "]\n";
            }
            write_output(out, sg_out);
            return 0;
        }
        if (!complete)
            throw DomainError("sigmas: unestimable slots need --default before adjustment");
        pose::SigmaVector s = pose::SigmaVector::floored(raw);
        if (!sg_mult.empty()) s = pose::adjust_sigmas(s, io::load_multipliers(sg_mult));
        out = "[";
        for (int i = 0; i < pose::kNumKeypoints; ++i) {
            out += std::to_string(s.values[i]);
            out += i + 1 < pose::kNumKeypoints ? ", " : "]\n";
        }
        write_output(out, sg_out);
    } else if (cmd_pl->parsed()) {
        auto pose3 = io::load_pose3(pl_pose);
        auto spheres = io::load_spheres(pl_spheres);
        auto effector = io::load_effector(pl_eff);
        auto planned = plan::plan_wrap_trajectory(pose3, spheres, effector, pl_maxstep);
        auto resolved = plan::shift_waypoints(planned.trajectory, planned.wrap_curve, spheres,
                                              effector, pl_clearance, pl_step, pl_iters);
        if (!resolved) throw DomainError("plan: collision could not be resolved (infeasible)");
        write_output(io::trajectory_to_json(*resolved), pl_out);
    } else if (cmd_sim->parsed()) {
        sim::SceneParams sp;
        sp.truss_count = sim_episodes;
        sp.ripe_fraction = sim_ripe;
        sim::Policy policy = sim_policy.empty() ? sim::Policy{} : io::load_policy(sim_policy);
        sim::NoiseModel noise = io::load_noise(sim_noise);
        auto scene = sim::generate_scene(sim_seed, sp);
        std::vector<sim::EpisodeRecord> records;
        for (std::size_t i = 0; i < scene.trusses.size(); ++i)
            records.push_back(
                sim::run_episode(scene.trusses[i], noise, policy, static_cast<int>(i)));
        if (!sim_records_out.empty()) write_output(io::records_to_json(records), sim_records_out);
        write_output(render_report(sim::aggregate_report(records), sim_format), sim_out);
    } else if (cmd_rep->parsed()) {
        auto records = io::load_records(rep_records);
        write_output(render_report(sim::aggregate_report(records), rep_format), rep_out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
