#include "harvest/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace harvest::io {

using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

template <typename T>
T field(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) throw ParseError(path + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": field '" + key + "': " + e.what());
    }
}

pose::Visibility vis_from_int(int v, const std::string& path) {
    if (v < 0 || v > 2) throw ParseError(path + ": visibility flag must be 0, 1 or 2");
    return static_cast<pose::Visibility>(v);
}

pose::PedicelKeypointSet keypoint_set_from_json(const json& j, const std::string& path) {
    pose::PedicelKeypointSet set;
    auto bbox = field<std::vector<double>>(j, path, "bbox");
    if (bbox.size() != 4) throw ParseError(path + ": bbox must have 4 entries [x, y, w, h]");
    set.object_scale = bbox[2] * bbox[3];
    auto kps = field<std::vector<std::vector<double>>>(j, path, "keypoints");
    if (kps.size() != pose::kNumKeypoints)
        throw ParseError(path + ": keypoints must list exactly 7 [u, v, vis] triples");
    for (int i = 0; i < pose::kNumKeypoints; ++i) {
        if (kps[i].size() != 3) throw ParseError(path + ": keypoint entries are [u, v, vis]");
        set.keypoints[i] = {{kps[i][0], kps[i][1]},
                            vis_from_int(static_cast<int>(kps[i][2]), path)};
    }
    if (j.contains("fruit_keypoints"))
        for (const auto& fk : j.at("fruit_keypoints"))
            set.fruit_keypoints.push_back({fk.at(0).get<double>(), fk.at(1).get<double>()});
    return set;
}

}  // namespace

geom::CameraIntrinsics load_intrinsics(const std::string& path) {
    json j = load_json(path);
    geom::CameraIntrinsics K;
    K.fx = field<double>(j, path, "fx");
    K.fy = field<double>(j, path, "fy");
    K.cx = field<double>(j, path, "cx");
    K.cy = field<double>(j, path, "cy");
    K.width = field<int>(j, path, "width");
    K.height = field<int>(j, path, "height");
    K.validate();
    return K;
}

geom::PointCloud load_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    geom::PointCloud cloud;
    std::string line;
    int line_no = 0;
    bool saw_pixels = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x)) continue;  // blank or comment-only line
        if (!(ss >> y >> z))
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'x y z [u v]'");
        double u, v;
        if (ss >> u) {
            if (!(ss >> v))
                throw ParseError(path + ":" + std::to_string(line_no) + ": pixel needs both u and v");
            cloud.pixel_map.push_back({u, v});
            saw_pixels = true;
        } else if (saw_pixels) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": pixel columns must be present on every line or none");
        }
        cloud.points.push_back({x, y, z});
    }
    if (saw_pixels && cloud.pixel_map.size() != cloud.points.size())
        throw ParseError(path + ": pixel columns must be present on every line or none");
    return cloud;
}

std::vector<pheno::Detection> load_detections(const std::string& path) {
    json j = load_json(path);
    std::vector<pheno::Detection> out;
    for (const auto& d : j) {
        pheno::Detection det;
        det.id = field<int>(d, path, "id");
        std::string cls = field<std::string>(d, path, "class");
        if (cls == "truss") det.cls = pheno::DetectionClass::Truss;
        else if (cls == "fruit") det.cls = pheno::DetectionClass::Fruit;
        else throw ParseError(path + ": class must be 'truss' or 'fruit'");
        auto bb = field<std::vector<double>>(d, path, "bbox");
        if (bb.size() != 4) throw ParseError(path + ": bbox must be [x0, y0, x1, y1]");
        det.bbox = {bb[0], bb[1], bb[2], bb[3]};
        det.confidence = field<double>(d, path, "conf");
        if (det.cls == pheno::DetectionClass::Fruit) {
            std::string m = field<std::string>(d, path, "maturity");
            auto stage = pheno::maturity_from_name(m);
            if (!stage) throw ParseError(path + ": unknown maturity '" + m + "'");
            det.maturity = stage;
        }
        det.validate();
        out.push_back(det);
    }
    return out;
}

std::vector<pose::PedicelKeypointSet> load_keypoint_annotations(const std::string& path) {
    json j = load_json(path);
    std::vector<pose::PedicelKeypointSet> out;
    for (const auto& item : j) out.push_back(keypoint_set_from_json(item, path));
    return out;
}

std::vector<std::vector<pose::PedicelKeypointSet>> load_annotator_sets(const std::string& path) {
    json j = load_json(path);
    std::vector<std::vector<pose::PedicelKeypointSet>> out;
    for (const auto& annotator : j) {
        std::vector<pose::PedicelKeypointSet> set;
        for (const auto& item : annotator) set.push_back(keypoint_set_from_json(item, path));
        out.push_back(std::move(set));
    }
    return out;
}

pose::SigmaVector load_sigmas(const std::string& path) {
    json j = load_json(path);
    if (!j.is_array() || j.size() != pose::kNumKeypoints)
        throw ParseError(path + ": sigma file must be a 7-element array");
    pose::SigmaVector s;
    for (int i = 0; i < pose::kNumKeypoints; ++i) s.values[i] = j.at(i).get<double>();
    s.validate();
    return s;
}

std::array<double, pose::kNumKeypoints> load_multipliers(const std::string& path) {
    json j = load_json(path);
    if (!j.is_array() || j.size() != pose::kNumKeypoints)
        throw ParseError(path + ": multiplier file must be a 7-element array");
    std::array<double, pose::kNumKeypoints> m;
    for (int i = 0; i < pose::kNumKeypoints; ++i) m[i] = j.at(i).get<double>();
    return m;
}

pose::PedicelPose3 load_pose3(const std::string& path) {
    json j = load_json(path);
    auto kps = field<std::vector<std::vector<double>>>(j, path, "keypoints");
    if (kps.size() != pose::kNumKeypoints)
        throw ParseError(path + ": keypoints must list exactly 7 [x, y, z, vis] rows");
    pose::PedicelPose3 p;
    for (int i = 0; i < pose::kNumKeypoints; ++i) {
        if (kps[i].size() != 4) throw ParseError(path + ": keypoint entries are [x, y, z, vis]");
        p.keypoints[i] = {{kps[i][0], kps[i][1], kps[i][2]},
                          vis_from_int(static_cast<int>(kps[i][3]), path)};
    }
    return p;
}

std::vector<pheno::FruitSphere> load_spheres(const std::string& path) {
    json j = load_json(path);
    std::vector<pheno::FruitSphere> out;
    for (const auto& item : j) {
        auto c = field<std::vector<double>>(item, path, "center");
        if (c.size() != 3) throw ParseError(path + ": center must be [x, y, z]");
        pheno::FruitSphere s;
        s.center = {c[0], c[1], c[2]};
        s.radius = field<double>(item, path, "radius");
        if (s.radius <= 0) throw ParseError(path + ": radius must be positive");
        s.volume = 4.0 / 3.0 * M_PI * s.radius * s.radius * s.radius;
        out.push_back(s);
    }
    return out;
}

plan::EffectorModel load_effector(const std::string& path) {
    json j = load_json(path);
    plan::EffectorModel e;
    e.inner_radius = field<double>(j, path, "inner_radius");
    e.height = field<double>(j, path, "height");
    e.blade_slot_width = field<double>(j, path, "blade_slot_width");
    e.approach_clearance = field<double>(j, path, "approach_clearance");
    e.rotation_cut_angle = field<double>(j, path, "rotation_cut_angle");
    e.validate();
    return e;
}

sim::NoiseModel load_noise(const std::string& path) {
    json j = load_json(path);
    sim::NoiseModel n;
    n.keypoint_sigma = field<double>(j, path, "keypoint_sigma");
    n.depth_sigma = field<double>(j, path, "depth_sigma");
    n.maturity_flip_prob = field<double>(j, path, "maturity_flip_prob");
    if (j.contains("rng_seed")) n.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    n.validate();
    return n;
}

sim::Policy load_policy(const std::string& path) {
    json j = load_json(path);
    sim::Policy p;
    if (j.contains("effector")) {
        const auto& e = j.at("effector");
        p.effector.inner_radius = field<double>(e, path, "inner_radius");
        p.effector.height = field<double>(e, path, "height");
        p.effector.blade_slot_width = field<double>(e, path, "blade_slot_width");
        p.effector.approach_clearance = field<double>(e, path, "approach_clearance");
        p.effector.rotation_cut_angle = field<double>(e, path, "rotation_cut_angle");
    }
    if (j.contains("workspace")) {
        const auto& w = j.at("workspace");
        auto base = field<std::vector<double>>(w, path, "base");
        if (base.size() != 3) throw ParseError(path + ": workspace base must be [x, y, z]");
        p.workspace.base = {base[0], base[1], base[2]};
        p.workspace.r_min = field<double>(w, path, "r_min");
        p.workspace.r_max = field<double>(w, path, "r_max");
        p.workspace.y_min = field<double>(w, path, "y_min");
        p.workspace.y_max = field<double>(w, path, "y_max");
    }
    if (j.contains("collision_clearance")) p.collision_clearance = j.at("collision_clearance");
    if (j.contains("shift_step")) p.shift_step = j.at("shift_step");
    if (j.contains("shift_max_iters")) p.shift_max_iters = j.at("shift_max_iters");
    if (j.contains("inward_margin")) p.inward_margin = j.at("inward_margin");
    if (j.contains("max_step")) p.max_step = j.at("max_step");
    if (j.contains("attempt_limit")) p.attempt_limit = j.at("attempt_limit");
    if (j.contains("time")) {
        const auto& t = j.at("time");
        if (t.contains("position_s")) p.time.position_s = t.at("position_s");
        if (t.contains("wrap_s")) p.time.wrap_s = t.at("wrap_s");
        if (t.contains("approach_s")) p.time.approach_s = t.at("approach_s");
        if (t.contains("cut_s")) p.time.cut_s = t.at("cut_s");
        if (t.contains("travel_speed")) p.time.travel_speed = t.at("travel_speed");
    }
    p.effector.validate();
    return p;
}

namespace {

std::optional<pose::OrientationClass> orientation_from_name(const std::string& name) {
    for (int i = 0; i < 5; ++i)
        if (name == pose::orientation_name(static_cast<pose::OrientationClass>(i)))
            return static_cast<pose::OrientationClass>(i);
    return std::nullopt;
}

}  // namespace

std::vector<sim::EpisodeRecord> load_records(const std::string& path) {
    json j = load_json(path);
    std::vector<sim::EpisodeRecord> out;
    for (const auto& item : j) {
        sim::EpisodeRecord r;
        r.truss_id = field<int>(item, path, "truss_id");
        std::string cls = field<std::string>(item, path, "pose");
        auto orient = orientation_from_name(cls);
        if (!orient) throw ParseError(path + ": unknown pose class '" + cls + "'");
        r.pose_class = *orient;
        r.attempted = field<bool>(item, path, "attempted");
        auto opt_bool = [&](const char* key) -> std::optional<bool> {
            if (!item.contains(key) || item.at(key).is_null()) return std::nullopt;
            return item.at(key).get<bool>();
        };
        r.sp_identified = opt_bool("sp_identified");
        r.wrapped = opt_bool("wrapped");
        r.detached = opt_bool("detached");
        r.harvested = field<bool>(item, path, "harvested");
        if (item.contains("time_s") && !item.at("time_s").is_null())
            r.time_s = item.at("time_s").get<double>();
        try {
            r.validate();
        } catch (const DomainError& e) {
            throw ParseError(path + ": " + e.what());
        }
        out.push_back(r);
    }
    return out;
}

std::string phenotypes_to_json(const std::vector<pheno::TrussPhenotype>& phenotypes) {
    json out = json::array();
    for (const auto& ph : phenotypes) {
        json spheres = json::array();
        for (const auto& s : ph.fruit_spheres)
            spheres.push_back({{"center", {s.center.x, s.center.y, s.center.z}},
                               {"radius", s.radius},
                               {"volume", s.volume}});
        json maturities = json::array();
        for (auto m : ph.fruit_maturities) maturities.push_back(pheno::maturity_name(m));
        out.push_back({{"truss_id", ph.truss_id},
                       {"fruit_ids", ph.fruit_ids},
                       {"fruit_maturities", maturities},
                       {"terminal_fruit_id", ph.terminal_fruit_id},
                       {"fruit_spheres", spheres},
                       {"overall_ripe", ph.overall_ripe},
                       {"fruit_count", ph.fruit_count}});
    }
    return out.dump(2) + "\n";
}

std::string trajectory_to_json(const plan::Trajectory& traj) {
    json out = json::array();
    for (const auto& w : traj.waypoints)
        out.push_back({{"xyz", {w.p.x, w.p.y, w.p.z}},
                       {"phase", plan::phase_name(w.phase)},
                       {"yaw_deg", w.yaw_deg}});
    return out.dump(2) + "\n";
}

std::string records_to_json(const std::vector<sim::EpisodeRecord>& records) {
    json out = json::array();
    auto opt = [](const std::optional<bool>& v) -> json {
        return v ? json(*v) : json(nullptr);
    };
    for (const auto& r : records) {
        json item = {{"truss_id", r.truss_id},
                     {"pose", pose::orientation_name(r.pose_class)},
                     {"attempted", r.attempted},
                     {"sp_identified", opt(r.sp_identified)},
                     {"wrapped", opt(r.wrapped)},
                     {"detached", opt(r.detached)},
                     {"harvested", r.harvested},
                     {"time_s", r.time_s ? json(*r.time_s) : json(nullptr)}};
        item["rejected"] = r.rejected ? json(plan::reject_reason_name(*r.rejected)) : json(nullptr);
        item["failure"] = r.failure ? json(plan::failure_reason_name(*r.failure)) : json(nullptr);
        out.push_back(item);
    }
    return out.dump(2) + "\n";
}

std::string report_to_json(const sim::Report& report) {
    auto row_json = [](const sim::ReportRow& row) {
        auto stage = [](const sim::StageCount& c) {
            return json{{"successes", c.successes}, {"attempts", c.attempts}};
        };
        json j = {{"label", row.label},
                  {"sp_identification", stage(row.sp)},
                  {"bottom_up_wrapping", stage(row.wrapped)},
                  {"detach", stage(row.detached)},
                  {"harvesting", stage(row.harvested)}};
        j["mean_time_s"] = row.mean_time_s ? json(*row.mean_time_s) : json(nullptr);
        return j;
    };
    json rows = json::array();
    for (const auto& row : report.rows) rows.push_back(row_json(row));
    json out = {{"rows", rows},
                {"overall", row_json(report.footer)},
                {"rejected_count", report.rejected_count}};
    return out.dump(2) + "\n";
}

}  // namespace harvest::io
