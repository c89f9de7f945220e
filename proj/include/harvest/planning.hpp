#pragma once

#include <optional>
#include <vector>

#include "harvest/geometry.hpp"
#include "harvest/phenotyping.hpp"
#include "harvest/pose.hpp"

namespace harvest::plan {

// Open-topped cylindrical end effector: the truss enters the bore through
// the rim as the effector ascends. Waypoints locate the rim center; the
// body extends `height` below the rim (+y, camera frame).
struct EffectorModel {
    double inner_radius = 0.07;
    double height = 0.12;
    double blade_slot_width = 0.015;
    double approach_clearance = 0.02;
    double rotation_cut_angle = 120.0;  // degrees

    void validate() const;
};

// SCARA workspace abstraction: reachable iff the target lies in a
// horizontal annulus around the base and within the vertical travel range.
struct Workspace {
    Point3 base{0, 0, 0};
    double r_min = 0.2;
    double r_max = 1.5;
    double y_min = -0.8;  // highest reachable point (y down)
    double y_max = 0.8;

    bool contains(const Point3& p) const;
};

struct TargetFeature {
    int truss_id = 0;
    bool overall_ripe = false;
    pose::OrientationClass orientation = pose::OrientationClass::Front;
    bool reachable = true;
    int fruit_count = 0;
    double median_volume = 0.0;
    pose::PedicelPose3 pose;
};

enum class Phase { Position, Wrap, ApproachSP, RotateCut };
const char* phase_name(Phase p);

struct Waypoint {
    Point3 p;
    Phase phase = Phase::Position;
    double yaw_deg = 0.0;
};

struct Trajectory {
    std::vector<Waypoint> waypoints;
};

enum class RejectReason { Immature, Orientation, Unreachable };
const char* reject_reason_name(RejectReason r);

struct FilterResult {
    std::vector<TargetFeature> accepted;  // ranked, nearest SP to base first
    std::vector<std::pair<TargetFeature, RejectReason>> rejected;
};

FilterResult filter_targets(const std::vector<TargetFeature>& features, const Workspace& workspace);

struct PlanResult {
    Trajectory trajectory;
    geom::ParametricCurve wrap_curve;  // fitted through EP..FP
};

// Bottom-up wrap: start below the lowest fruit, ascend along the curve
// through EP, TQP, MP, QP, FP, then approach SP and rotate to cut.
PlanResult plan_wrap_trajectory(const pose::PedicelPose3& pose,
                                const std::vector<pheno::FruitSphere>& spheres,
                                const EffectorModel& effector, double max_step = 0.05);

struct Collision {
    std::size_t waypoint_index = 0;
    std::size_t sphere_index = 0;
};

// First waypoint where a fruit sphere comes within `clearance` of the
// effector wall or rim. A sphere fully inside the bore is not a collision.
std::optional<Collision> check_collision(const Trajectory& traj,
                                         const std::vector<pheno::FruitSphere>& spheres,
                                         const EffectorModel& effector, double clearance);

// Distance from a point to the effector's lateral surface (rim edges
// included) for a cylinder whose rim center sits at `rim`.
double effector_surface_distance(const Point3& q, const Point3& rim, const EffectorModel& effector);

// Iteratively shifts colliding wrap waypoints outward along the curve
// normal. Returns nullopt when max_iters is exhausted (plan infeasible).
std::optional<Trajectory> shift_waypoints(Trajectory traj, const geom::ParametricCurve& curve,
                                          const std::vector<pheno::FruitSphere>& spheres,
                                          const EffectorModel& effector, double clearance,
                                          double step = 0.01, int max_iters = 10);

enum class HarvestState { Idle, Positioning, Wrapping, ApproachingSP, Cutting, Severed, Failed };
const char* state_name(HarvestState s);

enum class FailureReason { CollisionDisplacement, PoseError, EffectorLimit, Unreachable };
const char* failure_reason_name(FailureReason r);

struct StateStatus {
    HarvestState state = HarvestState::Idle;
    std::optional<FailureReason> reason;
};

enum class EventType { Start, Positioned, Wrapped, ReachedSP, Cut, Abort };

struct Event {
    EventType type = EventType::Start;
    double sp_offset = 0.0;  // Cut: distance from SP to the blade slot
    FailureReason abort_reason = FailureReason::EffectorLimit;
};

// Deterministic transition table; illegal (state, event) pairs throw.
StateStatus step_harvest(const StateStatus& status, const Event& event,
                         const EffectorModel& effector);

}  // namespace harvest::plan
