#include "harvest/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>

namespace harvest::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Self-contained draws so scene and episode generation are reproducible
// independent of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive
        return std::min(hi, lo + static_cast<int>(uniform() * (hi - lo + 1)));
    }
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = std::max(uniform(), 1e-300);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }
    Vec3 normal3() {
        double a = normal(), b = normal(), c = normal();
        return {a, b, c};
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

Vec3 growth_direction(pose::OrientationClass c) {
    switch (c) {
        case pose::OrientationClass::Front: return {0, 0, -1};
        case pose::OrientationClass::Right: return {1, 0, 0};
        case pose::OrientationClass::Left: return {-1, 0, 0};
        case pose::OrientationClass::Back: return {0, 0, 1};
        case pose::OrientationClass::Inward: return {0, 0, 1};
    }
    return {0, 0, -1};
}

double growth_magnitude(pose::OrientationClass c, Rng& rng) {
    switch (c) {
        case pose::OrientationClass::Back: return rng.uniform(0.02, 0.04);    // stays under margin
        case pose::OrientationClass::Inward: return rng.uniform(0.10, 0.15);  // past the margin
        // Harvestable directions keep the fruit column inside the bore both
        // while ascending at EP and once the rim is offset to put SP in the
        // blade slot; the window on the spread is narrow.
        default: return rng.uniform(0.065, 0.072);
    }
}

}  // namespace

void SceneParams::validate() const {
    if (truss_count < 1) throw DomainError("scene params: truss_count must be >= 1");
    if (orientation_cycle.empty()) throw DomainError("scene params: empty orientation mix");
    if (fruit_min < 1 || fruit_max < fruit_min)
        throw DomainError("scene params: invalid fruit count range");
    if (ripe_fraction < 0.0 || ripe_fraction > 1.0)
        throw DomainError("scene params: ripe_fraction outside [0,1]");
    camera.validate();
}

void NoiseModel::validate() const {
    if (keypoint_sigma < 0.0 || depth_sigma < 0.0)
        throw DomainError("noise: sigmas must be non-negative");
    if (maturity_flip_prob < 0.0 || maturity_flip_prob > 1.0)
        throw DomainError("noise: maturity_flip_prob outside [0,1]");
}

Point3 droop_point(const Point3& a, const Point3& b, double sag, double u) {
    Point3 p = a + (b - a) * u;
    p.y += 4.0 * sag * u * (1.0 - u);  // belly hangs downward (+y)
    return p;
}

double droop_arc_length(const Point3& a, const Point3& b, double sag, double u) {
    constexpr int kSteps = 8192;
    int n = std::max(1, static_cast<int>(std::ceil(u * kSteps)));
    double len = 0.0;
    Point3 prev = a;
    for (int i = 1; i <= n; ++i) {
        Point3 p = droop_point(a, b, sag, u * i / n);
        len += (p - prev).norm();
        prev = p;
    }
    return len;
}

double droop_u_at_fraction(const Point3& a, const Point3& b, double sag, double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw DomainError("droop: fraction outside [0,1]");
    double total = droop_arc_length(a, b, sag, 1.0);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 48; ++i) {
        double mid = 0.5 * (lo + hi);
        (droop_arc_length(a, b, sag, mid) < fraction * total ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params) {
    params.validate();
    SyntheticScene scene;
    scene.seed = seed;
    scene.camera = params.camera;

    for (int t = 0; t < params.truss_count; ++t) {
        Rng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(t) + 1)));
        TrussTruth truss;
        truss.id = t;
        truss.orientation = params.orientation_cycle[t % params.orientation_cycle.size()];

        Point3 sp{rng.uniform(-0.20, 0.20), rng.uniform(-0.15, -0.05), rng.uniform(0.75, 0.95)};
        Vec3 dir = growth_direction(truss.orientation);
        Vec3 h = dir * growth_magnitude(truss.orientation, rng);
        double drop = rng.uniform(0.10, 0.14);
        double sag = rng.uniform(0.005, 0.015);

        using pose::KeypointId;
        Point3 cp = sp + h * 0.12 + Vec3{0, 0.008, 0};
        Point3 fp = sp + h * 0.30 + Vec3{0, 0.025, 0};
        Point3 ep = fp + h * 0.70 + Vec3{0, drop, 0};
        auto set = [&](KeypointId id, const Point3& p) {
            truss.keypoints.at(id) = {p, pose::Visibility::Visible};
        };
        set(KeypointId::SP, sp);
        set(KeypointId::CP, cp);
        set(KeypointId::FP, fp);
        set(KeypointId::QP, droop_point(fp, ep, sag, droop_u_at_fraction(fp, ep, sag, 0.25)));
        set(KeypointId::MP, droop_point(fp, ep, sag, droop_u_at_fraction(fp, ep, sag, 0.50)));
        set(KeypointId::TQP, droop_point(fp, ep, sag, droop_u_at_fraction(fp, ep, sag, 0.75)));
        set(KeypointId::EP, ep);

        int fruit_count = rng.uniform_int(params.fruit_min, params.fruit_max);
        for (int k = 0; k < fruit_count; ++k) {
            double u = (k + 0.5) / fruit_count;  // ascending: terminal fruit last
            Point3 attach = droop_point(fp, ep, sag, u);
            pheno::FruitSphere s;
            s.center = attach + Vec3{rng.uniform(-0.004, 0.004), rng.uniform(0.02, 0.025),
                                     rng.uniform(-0.004, 0.004)};
            s.radius = rng.uniform(0.010, 0.013);
            s.volume = 4.0 / 3.0 * M_PI * s.radius * s.radius * s.radius;
            truss.spheres.push_back(s);
        }

        bool ripe = rng.uniform() < params.ripe_fraction;
        for (int k = 0; k < fruit_count; ++k) {
            bool terminal = (k == fruit_count - 1);
            if (terminal)
                truss.maturities.push_back(static_cast<pheno::MaturityStage>(rng.uniform_int(1, 3)));
            else
                truss.maturities.push_back(static_cast<pheno::MaturityStage>(rng.uniform_int(2, 3)));
        }
        if (!ripe) {
            if (fruit_count > 1 && rng.uniform() < 0.5)
                truss.maturities[rng.uniform_int(0, fruit_count - 2)] = pheno::MaturityStage::Turning;
            else
                truss.maturities[fruit_count - 1] = pheno::MaturityStage::GreenMature;
        }

        // Detections and the rendered cloud derive from ground truth.
        cluster::BBox truss_box{1e9, 1e9, -1e9, -1e9};
        for (int k = 0; k < fruit_count; ++k) {
            const auto& s = truss.spheres[k];
            Pixel c = geom::project(s.center, scene.camera);
            double r_px = scene.camera.mean_focal() * s.radius / s.center.z;
            pheno::Detection det;
            det.id = 1000 * (t + 1) + k;
            det.cls = pheno::DetectionClass::Fruit;
            det.bbox = {c.u - r_px, c.v - r_px, c.u + r_px, c.v + r_px};
            det.confidence = 0.9;
            det.maturity = truss.maturities[k];
            scene.detections.push_back(det);
            truss_box.x_min = std::min(truss_box.x_min, det.bbox.x_min);
            truss_box.y_min = std::min(truss_box.y_min, det.bbox.y_min);
            truss_box.x_max = std::max(truss_box.x_max, det.bbox.x_max);
            truss_box.y_max = std::max(truss_box.y_max, det.bbox.y_max);

            geom::PointCloud surf = geom::sphere_virtual_cloud(s.center, s.radius, 150);
            for (const auto& p : surf.points) {
                if (p.z >= s.center.z) continue;  // back of the fruit is occluded
                Pixel px = geom::project(p, scene.camera);
                if (!scene.camera.contains(px)) continue;
                scene.cloud.points.push_back(p);
                scene.cloud.pixel_map.push_back(px);
            }
        }
        for (const auto& kp : truss.keypoints.keypoints) {
            Pixel px = geom::project(kp.p, scene.camera);
            truss_box.x_min = std::min(truss_box.x_min, px.u - 5);
            truss_box.y_min = std::min(truss_box.y_min, px.v - 5);
            truss_box.x_max = std::max(truss_box.x_max, px.u + 5);
            truss_box.y_max = std::max(truss_box.y_max, px.v + 5);
        }
        pheno::Detection tdet;
        tdet.id = t;
        tdet.cls = pheno::DetectionClass::Truss;
        tdet.bbox = truss_box;
        tdet.confidence = 0.9;
        scene.detections.push_back(tdet);
        scene.trusses.push_back(std::move(truss));
    }
    return scene;
}

void EpisodeRecord::validate() const {
    if (harvested && !(wrapped.value_or(false) && detached.value_or(false)))
        throw DomainError("episode record: harvested requires wrapped and detached");
    if (!wrapped.value_or(false) && detached.has_value() && detached.value())
        throw DomainError("episode record: detached without a successful wrap");
}

namespace {

struct AttemptOutcome {
    bool accepted = false;
    std::optional<plan::RejectReason> rejected;
    bool sp_identified = false;
    bool wrapped = false;
    bool detached = false;
    std::optional<plan::FailureReason> failure;
    double time_s = 0.0;
};

AttemptOutcome run_attempt(const TrussTruth& truss, const NoiseModel& noise, const Policy& policy,
                           int episode_index, int attempt) {
    using pose::KeypointId;
    std::uint64_t s = splitmix64(noise.rng_seed + 0x51ED270B);
    s = splitmix64(s ^ static_cast<std::uint64_t>(truss.id + 1));
    // Distinguish trusses from different scenes that share an id; the
    // stream must stay independent of the noise magnitudes themselves.
    Point3 anchor = truss.keypoints.at(KeypointId::SP).p;
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &anchor.x, sizeof(bits));
    s = splitmix64(s ^ bits);
    std::memcpy(&bits, &anchor.z, sizeof(bits));
    s = splitmix64(s ^ bits);
    s = splitmix64(s ^ (static_cast<std::uint64_t>(episode_index + 1) << 20));
    s = splitmix64(s ^ (static_cast<std::uint64_t>(attempt + 1) << 40));
    Rng rng(s);

    // All stochastic draws are made unconditionally and scaled by the noise
    // magnitudes, so raising a sigma degrades each episode monotonically.
    pose::PedicelPose3 observed = truss.keypoints;
    for (auto& kp : observed.keypoints) kp.p += rng.normal3() * noise.keypoint_sigma;

    std::vector<pheno::MaturityStage> observed_maturity = truss.maturities;
    for (auto& m : observed_maturity) {
        double u = rng.uniform();
        int shift = rng.uniform_int(1, 3);
        if (u < noise.maturity_flip_prob)
            m = static_cast<pheno::MaturityStage>((static_cast<int>(m) + shift) % 4);
    }

    std::vector<pheno::FruitSphere> perceived = truss.spheres;
    for (auto& sp : perceived) sp.center.z += rng.normal() * noise.depth_sigma;

    AttemptOutcome out;

    Vec3 centroid{0, 0, 0};
    for (const auto& f : perceived) centroid += f.center;
    centroid = centroid / static_cast<double>(perceived.size());

    plan::TargetFeature feature;
    feature.truss_id = truss.id;
    feature.pose = observed;
    feature.overall_ripe = pheno::truss_maturity(observed_maturity, observed_maturity.size() - 1);
    feature.orientation = pose::classify_orientation(observed, centroid, policy.inward_margin);
    feature.reachable = policy.workspace.contains(observed.at(KeypointId::SP).p);
    feature.fruit_count = static_cast<int>(perceived.size());

    auto filtered = plan::filter_targets({feature}, policy.workspace);
    if (filtered.accepted.empty()) {
        out.rejected = filtered.rejected.front().second;
        return out;
    }
    out.accepted = true;

    plan::StateStatus state = plan::step_harvest({plan::HarvestState::Idle, {}},
                                                 {plan::EventType::Start}, policy.effector);
    out.time_s += policy.time.position_s;

    plan::PlanResult planned;
    try {
        planned = plan::plan_wrap_trajectory(observed, perceived, policy.effector, policy.max_step);
    } catch (const PoseIncompleteError&) {
        out.failure = plan::FailureReason::PoseError;
        plan::step_harvest(state, {plan::EventType::Abort, 0.0, *out.failure}, policy.effector);
        return out;
    }
    state = plan::step_harvest(state, {plan::EventType::Positioned}, policy.effector);
    out.time_s += policy.time.wrap_s;
    for (std::size_t i = 1; i < planned.trajectory.waypoints.size(); ++i)
        out.time_s += (planned.trajectory.waypoints[i].p - planned.trajectory.waypoints[i - 1].p)
                          .norm() /
                      policy.time.travel_speed;

    auto resolved = plan::shift_waypoints(planned.trajectory, planned.wrap_curve, perceived,
                                          policy.effector, policy.collision_clearance,
                                          policy.shift_step, policy.shift_max_iters);
    if (!resolved) {
        out.failure = plan::FailureReason::EffectorLimit;
        plan::step_harvest(state, {plan::EventType::Abort, 0.0, *out.failure}, policy.effector);
        return out;
    }
    // The resolved plan must also clear the true fruit positions; a plan
    // built on noisy perception can still displace the target.
    if (plan::check_collision(*resolved, truss.spheres, policy.effector,
                              policy.collision_clearance)) {
        out.failure = plan::FailureReason::CollisionDisplacement;
        plan::step_harvest(state, {plan::EventType::Abort, 0.0, *out.failure}, policy.effector);
        return out;
    }
    out.wrapped = true;
    state = plan::step_harvest(state, {plan::EventType::Wrapped}, policy.effector);
    out.time_s += policy.time.approach_s;
    state = plan::step_harvest(state, {plan::EventType::ReachedSP}, policy.effector);
    out.time_s += policy.time.cut_s;

    double sp_offset =
        (observed.at(KeypointId::SP).p - truss.keypoints.at(KeypointId::SP).p).norm();
    out.sp_identified = sp_offset <= policy.effector.blade_slot_width / 2.0;
    state = plan::step_harvest(state, {plan::EventType::Cut, sp_offset}, policy.effector);
    out.detached = (state.state == plan::HarvestState::Severed);
    if (!out.detached) out.failure = state.reason;
    return out;
}

}  // namespace

EpisodeRecord run_episode(const TrussTruth& truss, const NoiseModel& noise, const Policy& policy,
                          int episode_index) {
    noise.validate();
    policy.effector.validate();
    if (policy.attempt_limit < 1) throw DomainError("policy: attempt_limit must be >= 1");

    EpisodeRecord rec;
    rec.truss_id = truss.id;
    rec.pose_class = truss.orientation;

    double total_time = 0.0;
    AttemptOutcome last;
    for (int attempt = 0; attempt < policy.attempt_limit; ++attempt) {
        last = run_attempt(truss, noise, policy, episode_index, attempt);
        total_time += last.time_s;
        if (!last.accepted) break;              // filtered out: no retry
        if (last.wrapped && last.detached) break;
    }

    if (!last.accepted) {
        rec.rejected = last.rejected;
        return rec;
    }
    rec.attempted = true;
    rec.sp_identified = last.sp_identified;
    rec.wrapped = last.wrapped;
    rec.detached = last.wrapped ? std::optional<bool>(last.detached) : std::nullopt;
    rec.harvested = last.wrapped && last.detached;
    rec.failure = last.failure;
    rec.time_s = total_time;
    rec.validate();
    return rec;
}

namespace {

void accumulate(ReportRow& row, const EpisodeRecord& r) {
    if (r.sp_identified) {
        ++row.sp.attempts;
        if (*r.sp_identified) ++row.sp.successes;
    }
    if (r.wrapped) {
        ++row.wrapped.attempts;
        if (*r.wrapped) ++row.wrapped.successes;
    }
    if (r.detached) {
        ++row.detached.attempts;
        if (*r.detached) ++row.detached.successes;
    }
    ++row.harvested.attempts;
    if (r.harvested) ++row.harvested.successes;
}

}  // namespace

Report aggregate_report(const std::vector<EpisodeRecord>& records) {
    if (records.empty()) throw DomainError("aggregate_report: no records");

    Report report;
    report.footer.label = "overall";
    std::vector<ReportRow> rows(5);
    std::vector<double> times[5];
    std::vector<double> all_times;
    for (const auto& r : records) {
        r.validate();
        if (!r.attempted) {
            ++report.rejected_count;
            continue;
        }
        int cls = static_cast<int>(r.pose_class);
        rows[cls].label = pose::orientation_name(r.pose_class);
        accumulate(rows[cls], r);
        accumulate(report.footer, r);
        if (r.harvested && r.time_s) {
            times[cls].push_back(*r.time_s);
            all_times.push_back(*r.time_s);
        }
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
    };
    for (int c = 0; c < 5; ++c) {
        if (rows[c].harvested.attempts == 0) continue;
        rows[c].mean_time_s = mean(times[c]);
        report.rows.push_back(rows[c]);
    }
    report.footer.mean_time_s = mean(all_times);
    return report;
}

std::string format_rate(const StageCount& c) {
    if (c.empty()) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f%% (%d/%d)", 100.0 * c.successes / c.attempts,
                  c.successes, c.attempts);
    return buf;
}

namespace {

std::string format_time(const std::optional<double>& t) {
    if (!t) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *t);
    return buf;
}

}  // namespace

std::string render_markdown(const Report& report) {
    bool with_sp = report.footer.sp.attempts > 0;
    std::string out = "| Pose |";
    if (with_sp) out += " SP Identification |";
    out += " Bottom-up Wrapping | Detach | Harvesting | Mean time (s) |\n|---|";
    if (with_sp) out += "---|";
    out += "---|---|---|---|\n";
    auto line = [&](const ReportRow& row) {
        out += "| " + row.label + " |";
        if (with_sp) out += " " + format_rate(row.sp) + " |";
        out += " " + format_rate(row.wrapped) + " | " + format_rate(row.detached) + " | " +
               format_rate(row.harvested) + " | " + format_time(row.mean_time_s) + " |\n";
    };
    for (const auto& row : report.rows) line(row);
    line(report.footer);
    if (report.rejected_count > 0)
        out += "\nRejected before attempt: " + std::to_string(report.rejected_count) + "\n";
    return out;
}

std::string render_csv(const Report& report) {
    bool with_sp = report.footer.sp.attempts > 0;
    std::string out = "pose,";
    if (with_sp) out += "sp_identification,";
    out += "bottom_up_wrapping,detach,harvesting,mean_time_s\n";
    auto line = [&](const ReportRow& row) {
        out += row.label + ",";
        if (with_sp) out += format_rate(row.sp) + ",";
        out += format_rate(row.wrapped) + "," + format_rate(row.detached) + "," +
               format_rate(row.harvested) + "," + format_time(row.mean_time_s) + "\n";
    };
    for (const auto& row : report.rows) line(row);
    line(report.footer);
    return out;
}

}  // namespace harvest::sim
