#include "harvest/planning.hpp"

#include <algorithm>
#include <cmath>

namespace harvest::plan {

void EffectorModel::validate() const {
    if (inner_radius <= 0 || height <= 0 || blade_slot_width <= 0 || approach_clearance <= 0 ||
        rotation_cut_angle <= 0)
        throw DomainError("effector: all dimensions must be positive");
    if (blade_slot_width >= inner_radius)
        throw DomainError("effector: blade slot must be narrower than the bore radius");
}

bool Workspace::contains(const Point3& p) const {
    double dx = p.x - base.x, dz = p.z - base.z;
    double r = std::sqrt(dx * dx + dz * dz);
    return r >= r_min && r <= r_max && p.y >= y_min && p.y <= y_max;
}

const char* phase_name(Phase p) {
    static const char* names[] = {"position", "wrap", "approach_sp", "rotate_cut"};
    return names[static_cast<int>(p)];
}

const char* reject_reason_name(RejectReason r) {
    static const char* names[] = {"immature", "orientation", "unreachable"};
    return names[static_cast<int>(r)];
}

const char* state_name(HarvestState s) {
    static const char* names[] = {"idle",    "positioning", "wrapping", "approaching_sp",
                                  "cutting", "severed",     "failed"};
    return names[static_cast<int>(s)];
}

const char* failure_reason_name(FailureReason r) {
    static const char* names[] = {"collision_displacement", "pose_error", "effector_limit",
                                  "unreachable"};
    return names[static_cast<int>(r)];
}

FilterResult filter_targets(const std::vector<TargetFeature>& features,
                            const Workspace& workspace) {
    FilterResult out;
    for (const auto& f : features) {
        if (!f.pose.has(pose::KeypointId::SP))
            throw PoseIncompleteError("filter_targets: feature without SP keypoint");
        if (!f.overall_ripe) {
            out.rejected.emplace_back(f, RejectReason::Immature);
        } else if (f.orientation == pose::OrientationClass::Left ||
                   f.orientation == pose::OrientationClass::Back ||
                   f.orientation == pose::OrientationClass::Inward) {
            out.rejected.emplace_back(f, RejectReason::Orientation);
        } else if (!f.reachable) {
            out.rejected.emplace_back(f, RejectReason::Unreachable);
        } else {
            out.accepted.push_back(f);
        }
    }
    std::stable_sort(out.accepted.begin(), out.accepted.end(),
                     [&](const TargetFeature& a, const TargetFeature& b) {
                         double da = (a.pose.at(pose::KeypointId::SP).p - workspace.base).norm();
                         double db = (b.pose.at(pose::KeypointId::SP).p - workspace.base).norm();
                         return da < db;
                     });
    return out;
}

namespace {

// Append the open-ended linear interpolation (a, b] subdivided to steps
// no longer than max_step.
void append_segment(std::vector<Waypoint>& out, const Point3& a, const Point3& b, Phase phase,
                    double max_step, bool include_end) {
    double len = (b - a).norm();
    int steps = std::max(1, static_cast<int>(std::ceil(len / max_step)));
    int last = include_end ? steps : steps - 1;
    for (int i = 1; i <= last; ++i)
        out.push_back({a + (b - a) * (static_cast<double>(i) / steps), phase, 0.0});
}

}  // namespace

PlanResult plan_wrap_trajectory(const pose::PedicelPose3& kp,
                                const std::vector<pheno::FruitSphere>& spheres,
                                const EffectorModel& effector, double max_step) {
    effector.validate();
    using pose::KeypointId;
    for (KeypointId id : {KeypointId::EP, KeypointId::TQP, KeypointId::MP, KeypointId::QP,
                          KeypointId::FP, KeypointId::SP}) {
        if (!kp.has(id))
            throw PoseIncompleteError(std::string("plan_wrap_trajectory: missing keypoint ") +
                                      pose::keypoint_name(id));
    }
    Point3 ep = kp.at(KeypointId::EP).p;
    Point3 fp = kp.at(KeypointId::FP).p;
    Point3 sp = kp.at(KeypointId::SP).p;

    double bottom = ep.y;  // y grows downward
    for (const auto& s : spheres) bottom = std::max(bottom, s.center.y + s.radius);

    PlanResult result;
    Point3 start{ep.x, bottom + effector.height + effector.approach_clearance, ep.z};
    result.trajectory.waypoints.push_back({start, Phase::Position, 0.0});
    append_segment(result.trajectory.waypoints, start, ep, Phase::Position, max_step, false);

    result.wrap_curve = geom::fit_curve({ep, kp.at(KeypointId::TQP).p, kp.at(KeypointId::MP).p,
                                         kp.at(KeypointId::QP).p, fp});
    int n_wrap = std::max(8, static_cast<int>(std::ceil(result.wrap_curve.length() / max_step)) + 1);
    for (int i = 0; i < n_wrap; ++i) {
        double t = static_cast<double>(i) / (n_wrap - 1);
        result.trajectory.waypoints.push_back({result.wrap_curve.evaluate(t), Phase::Wrap, 0.0});
    }

    // Bring the rim to SP: the effector axis sits one bore radius to the
    // side so the blade slot on the rim meets the peduncle at SP.
    Vec3 h{fp.x - sp.x, 0.0, fp.z - sp.z};
    h = h.norm() > 1e-9 ? h.normalized() : Vec3{1, 0, 0};
    Point3 approach = sp + h * effector.inner_radius;
    append_segment(result.trajectory.waypoints, fp, approach, Phase::ApproachSP, max_step, true);

    result.trajectory.waypoints.push_back({approach, Phase::RotateCut, effector.rotation_cut_angle});
    return result;
}

double effector_surface_distance(const Point3& q, const Point3& rim,
                                 const EffectorModel& effector) {
    double dx = q.x - rim.x, dz = q.z - rim.z;
    double rho = std::sqrt(dx * dx + dz * dz);
    double radial = rho - effector.inner_radius;
    if (q.y < rim.y) return std::sqrt(radial * radial + (rim.y - q.y) * (rim.y - q.y));
    double y_bottom = rim.y + effector.height;
    if (q.y > y_bottom) return std::sqrt(radial * radial + (q.y - y_bottom) * (q.y - y_bottom));
    return std::abs(radial);
}

std::optional<Collision> check_collision(const Trajectory& traj,
                                         const std::vector<pheno::FruitSphere>& spheres,
                                         const EffectorModel& effector, double clearance) {
    effector.validate();
    if (clearance < 0) throw DomainError("check_collision: clearance must be non-negative");
    for (std::size_t w = 0; w < traj.waypoints.size(); ++w) {
        for (std::size_t s = 0; s < spheres.size(); ++s) {
            double d = effector_surface_distance(spheres[s].center, traj.waypoints[w].p, effector);
            if (d < spheres[s].radius + clearance) return Collision{w, s};
        }
    }
    return std::nullopt;
}

std::optional<Trajectory> shift_waypoints(Trajectory traj, const geom::ParametricCurve& curve,
                                          const std::vector<pheno::FruitSphere>& spheres,
                                          const EffectorModel& effector, double clearance,
                                          double step, int max_iters) {
    if (step <= 0 || max_iters < 1)
        throw DomainError("shift_waypoints: step and max_iters must be positive");
    for (int iter = 0; iter < max_iters; ++iter) {
        auto violation = check_collision(traj, spheres, effector, clearance);
        if (!violation) return traj;
        if (traj.waypoints[violation->waypoint_index].phase != Phase::Wrap)
            return std::nullopt;  // only wrap waypoints may be displaced
        std::size_t lo = violation->waypoint_index > 0 ? violation->waypoint_index - 1
                                                       : violation->waypoint_index;
        std::size_t hi = std::min(violation->waypoint_index + 1, traj.waypoints.size() - 1);
        for (std::size_t i = lo; i <= hi; ++i) {
            if (traj.waypoints[i].phase != Phase::Wrap) continue;
            double t = curve.nearest_parameter(traj.waypoints[i].p);
            traj.waypoints[i].p -= curve.normal(t) * step;
        }
    }
    if (!check_collision(traj, spheres, effector, clearance)) return traj;
    return std::nullopt;
}

StateStatus step_harvest(const StateStatus& status, const Event& event,
                         const EffectorModel& effector) {
    effector.validate();
    if (event.type == EventType::Abort) {
        switch (status.state) {
            case HarvestState::Positioning:
            case HarvestState::Wrapping:
            case HarvestState::ApproachingSP:
            case HarvestState::Cutting:
                return {HarvestState::Failed, event.abort_reason};
            default:
                throw ProtocolError("step_harvest: abort from inactive state");
        }
    }
    switch (status.state) {
        case HarvestState::Idle:
            if (event.type == EventType::Start) return {HarvestState::Positioning, {}};
            break;
        case HarvestState::Positioning:
            if (event.type == EventType::Positioned) return {HarvestState::Wrapping, {}};
            break;
        case HarvestState::Wrapping:
            if (event.type == EventType::Wrapped) return {HarvestState::ApproachingSP, {}};
            break;
        case HarvestState::ApproachingSP:
            if (event.type == EventType::ReachedSP) return {HarvestState::Cutting, {}};
            break;
        case HarvestState::Cutting:
            if (event.type == EventType::Cut) {
                if (event.sp_offset <= effector.blade_slot_width / 2.0)
                    return {HarvestState::Severed, {}};
                return {HarvestState::Failed, FailureReason::PoseError};
            }
            break;
        case HarvestState::Severed:
        case HarvestState::Failed:
            break;
    }
    throw ProtocolError(std::string("step_harvest: illegal event in state ") +
                        state_name(status.state));
}

}  // namespace harvest::plan
