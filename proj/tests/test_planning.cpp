#include <doctest.h>

#include <cmath>

#include "harvest/planning.hpp"

using namespace harvest;
using namespace harvest::plan;
using pose::KeypointId;

namespace {

// A gently curved downward-hanging peduncle around z = 1 m.
pose::PedicelPose3 sample_pose() {
    pose::PedicelPose3 p;
    auto set = [&](KeypointId id, double x, double y, double z) {
        p.at(id) = {{x, y, z}, pose::Visibility::Visible};
    };
    set(KeypointId::SP, 0.00, -0.05, 1.02);
    set(KeypointId::CP, 0.005, -0.02, 1.01);
    set(KeypointId::FP, 0.01, 0.02, 1.00);
    set(KeypointId::QP, 0.015, 0.07, 1.00);
    set(KeypointId::MP, 0.02, 0.12, 0.99);
    set(KeypointId::TQP, 0.02, 0.17, 0.99);
    set(KeypointId::EP, 0.015, 0.22, 0.98);
    return p;
}

TargetFeature make_feature(int id, bool ripe, pose::OrientationClass orient, bool reachable,
                           Point3 sp) {
    TargetFeature f;
    f.truss_id = id;
    f.overall_ripe = ripe;
    f.orientation = orient;
    f.reachable = reachable;
    f.pose.at(KeypointId::SP) = {sp, pose::Visibility::Visible};
    return f;
}

}  // namespace

TEST_CASE("effector model validation") {
    EffectorModel e;
    CHECK_NOTHROW(e.validate());
    e.blade_slot_width = e.inner_radius;
    CHECK_THROWS_AS(e.validate(), DomainError);
    e = EffectorModel{};
    e.height = 0.0;
    CHECK_THROWS_AS(e.validate(), DomainError);
}

TEST_CASE("workspace annulus membership") {
    Workspace w;
    CHECK(w.contains({0, 0, 1.0}));
    CHECK_FALSE(w.contains({0, 0, 0.1}));   // inside the inner radius
    CHECK_FALSE(w.contains({0, 0, 2.0}));   // beyond reach
    CHECK_FALSE(w.contains({0, 1.0, 1.0})); // below vertical travel
    CHECK(w.contains({1.5, 0, 0}));         // boundary is reachable
}

TEST_CASE("filter_targets applies rules in precedence order") {
    using OC = pose::OrientationClass;
    Workspace w;
    std::vector<TargetFeature> feats{
        make_feature(1, true, OC::Front, true, {0, 0, 1.0}),
        make_feature(2, false, OC::Front, true, {0, 0, 1.0}),
        make_feature(3, true, OC::Back, true, {0, 0, 1.0}),
        make_feature(4, true, OC::Left, true, {0, 0, 1.0}),
        make_feature(5, true, OC::Inward, true, {0, 0, 1.0}),
        make_feature(6, true, OC::Right, false, {0, 0, 1.0}),
        // immature and badly oriented: maturity wins
        make_feature(7, false, OC::Back, false, {0, 0, 1.0}),
    };
    auto out = filter_targets(feats, w);
    REQUIRE(out.accepted.size() == 1);
    CHECK(out.accepted[0].truss_id == 1);
    REQUIRE(out.rejected.size() == 6);
    CHECK(out.rejected[0].second == RejectReason::Immature);
    CHECK(out.rejected[1].second == RejectReason::Orientation);
    CHECK(out.rejected[2].second == RejectReason::Orientation);
    CHECK(out.rejected[3].second == RejectReason::Orientation);
    CHECK(out.rejected[4].second == RejectReason::Unreachable);
    CHECK(out.rejected[5].second == RejectReason::Immature);
}

TEST_CASE("filter_targets ranks accepted targets by SP distance") {
    using OC = pose::OrientationClass;
    Workspace w;
    std::vector<TargetFeature> feats{
        make_feature(1, true, OC::Front, true, {0, 0, 1.4}),
        make_feature(2, true, OC::Right, true, {0, 0, 0.8}),
        make_feature(3, true, OC::Front, true, {0, 0, 1.1}),
    };
    auto out = filter_targets(feats, w);
    REQUIRE(out.accepted.size() == 3);
    CHECK(out.accepted[0].truss_id == 2);
    CHECK(out.accepted[1].truss_id == 3);
    CHECK(out.accepted[2].truss_id == 1);

    TargetFeature no_sp;
    no_sp.overall_ripe = true;
    CHECK_THROWS_AS(filter_targets({no_sp}, w), PoseIncompleteError);
}

TEST_CASE("plan_wrap_trajectory phases appear in order") {
    EffectorModel e;
    auto plan = plan_wrap_trajectory(sample_pose(), {}, e, 0.05);
    REQUIRE_FALSE(plan.trajectory.waypoints.empty());
    int prev = -1;
    for (const auto& wp : plan.trajectory.waypoints) {
        int phase = static_cast<int>(wp.phase);
        CHECK(phase >= prev);
        prev = phase;
    }
    CHECK(plan.trajectory.waypoints.front().phase == Phase::Position);
    CHECK(plan.trajectory.waypoints.back().phase == Phase::RotateCut);
    CHECK(plan.trajectory.waypoints.back().yaw_deg == doctest::Approx(e.rotation_cut_angle));
}

TEST_CASE("plan_wrap_trajectory starts below every fruit") {
    EffectorModel e;
    std::vector<pheno::FruitSphere> spheres{{{0.01, 0.25, 0.99}, 0.02, 0.0}};
    auto plan = plan_wrap_trajectory(sample_pose(), spheres, e, 0.05);
    const auto& start = plan.trajectory.waypoints.front().p;
    double lowest = 0.25 + 0.02;  // lowest sphere extent (y down)
    CHECK(start.y == doctest::Approx(lowest + e.height + e.approach_clearance));
    // the whole effector body starts clear of the lowest fruit
    CHECK(start.y - e.height >= lowest + e.approach_clearance - 1e-12);
}

TEST_CASE("plan_wrap_trajectory respects max_step outside the cut") {
    EffectorModel e;
    auto plan = plan_wrap_trajectory(sample_pose(), {}, e, 0.03);
    const auto& wps = plan.trajectory.waypoints;
    for (std::size_t i = 1; i + 1 < wps.size(); ++i)
        CHECK((wps[i].p - wps[i - 1].p).norm() <= 0.03 + 1e-9);
}

TEST_CASE("wrap waypoints lie on the fitted curve") {
    EffectorModel e;
    auto plan = plan_wrap_trajectory(sample_pose(), {}, e, 0.05);
    for (const auto& wp : plan.trajectory.waypoints) {
        if (wp.phase != Phase::Wrap) continue;
        double t = plan.wrap_curve.nearest_parameter(wp.p);
        CHECK((plan.wrap_curve.evaluate(t) - wp.p).norm() < 1e-6);
    }
}

TEST_CASE("plan_wrap_trajectory needs the full wrap pose") {
    auto pose = sample_pose();
    pose.at(KeypointId::MP).vis = pose::Visibility::Absent;
    CHECK_THROWS_AS(plan_wrap_trajectory(pose, {}, EffectorModel{}, 0.05), PoseIncompleteError);
}

TEST_CASE("effector_surface_distance closed forms") {
    EffectorModel e;  // bore radius 0.07, height 0.12
    Point3 rim{0, 0, 1};
    // on the axis at rim depth: one bore radius from the wall
    CHECK(effector_surface_distance({0, 0.05, 1}, rim, e) == doctest::Approx(0.07));
    // outside the wall, mid-height
    CHECK(effector_surface_distance({0.10, 0.06, 1}, rim, e) == doctest::Approx(0.03));
    // above the rim, radially on the wall: distance equals the height gap
    CHECK(effector_surface_distance({0.07, -0.05, 1}, rim, e) == doctest::Approx(0.05));
    // below the bottom, on the wall radius
    CHECK(effector_surface_distance({0.07, 0.16, 1}, rim, e) == doctest::Approx(0.04));
    // diagonal to the rim edge
    CHECK(effector_surface_distance({0.10, -0.04, 1}, rim, e) ==
          doctest::Approx(std::hypot(0.03, 0.04)));
}

TEST_CASE("check_collision flags a wall graze and passes a bore-centered sphere") {
    EffectorModel e;
    Trajectory traj;
    traj.waypoints.push_back({{0, 0, 1}, Phase::Wrap, 0.0});

    // sphere centered on the axis, fully inside the bore
    std::vector<pheno::FruitSphere> inside{{{0, 0.05, 1}, 0.03, 0.0}};
    CHECK_FALSE(check_collision(traj, inside, e, 0.01).has_value());

    // sphere near the wall from outside
    std::vector<pheno::FruitSphere> graze{{{0.085, 0.06, 1}, 0.01, 0.0}};
    auto hit = check_collision(traj, graze, e, 0.01);
    REQUIRE(hit.has_value());
    CHECK(hit->waypoint_index == 0);
    CHECK(hit->sphere_index == 0);

    // same sphere with enough standoff
    std::vector<pheno::FruitSphere> clear{{{0.12, 0.06, 1}, 0.01, 0.0}};
    CHECK_FALSE(check_collision(traj, clear, e, 0.01).has_value());
    CHECK_THROWS_AS(check_collision(traj, clear, e, -0.01), DomainError);
}

TEST_CASE("check_collision reports the first offending waypoint") {
    EffectorModel e;
    Trajectory traj;
    traj.waypoints.push_back({{0, 0, 2}, Phase::Position, 0.0});
    traj.waypoints.push_back({{0, 0, 1}, Phase::Wrap, 0.0});
    traj.waypoints.push_back({{0, 0, 1}, Phase::Wrap, 0.0});
    std::vector<pheno::FruitSphere> spheres{{{0.08, 0.05, 1}, 0.02, 0.0}};
    auto hit = check_collision(traj, spheres, e, 0.005);
    REQUIRE(hit.has_value());
    CHECK(hit->waypoint_index == 1);
}

TEST_CASE("check_collision agrees with a surface sampling oracle") {
    EffectorModel e;
    Point3 rim{0.02, -0.01, 0.97};
    Trajectory traj;
    traj.waypoints.push_back({rim, Phase::Wrap, 0.0});
    std::vector<Point3> centers{{0.10, 0.03, 0.97}, {0.02, 0.05, 0.97}, {0.02, -0.20, 0.97},
                                {0.11, -0.06, 0.95}, {0.02, 0.20, 0.97}};
    for (const auto& c : centers) {
        // densely sample the lateral surface and rim circles
        double best = 1e9;
        for (int i = 0; i < 720; ++i) {
            double a = i * M_PI / 360.0;
            double wx = rim.x + e.inner_radius * std::cos(a);
            double wz = rim.z + e.inner_radius * std::sin(a);
            for (int j = 0; j <= 200; ++j) {
                double y = rim.y + e.height * j / 200.0;
                best = std::min(best, (Point3{wx, y, wz} - c).norm());
            }
        }
        CHECK(effector_surface_distance(c, rim, e) == doctest::Approx(best).epsilon(2e-4));
        double r = 0.015, clearance = 0.01;
        bool expect = effector_surface_distance(c, rim, e) < r + clearance;
        std::vector<pheno::FruitSphere> spheres{{c, r, 0.0}};
        CHECK(check_collision(traj, spheres, e, clearance).has_value() == expect);
    }
}

TEST_CASE("shift_waypoints resolves a marginal graze") {
    EffectorModel e;
    auto pose = sample_pose();
    auto plan = plan_wrap_trajectory(pose, {}, e, 0.05);
    // a small sphere just outside the wall near the mid wrap
    Point3 mid = plan.wrap_curve.evaluate(0.5);
    std::vector<pheno::FruitSphere> spheres{{{mid.x + e.inner_radius + 0.012, mid.y, mid.z},
                                             0.01, 0.0}};
    double clearance = 0.005;
    REQUIRE(check_collision(plan.trajectory, spheres, e, clearance).has_value());
    auto shifted = shift_waypoints(plan.trajectory, plan.wrap_curve, spheres, e, clearance);
    REQUIRE(shifted.has_value());
    CHECK_FALSE(check_collision(*shifted, spheres, e, clearance).has_value());
    // non-wrap waypoints were not displaced
    for (std::size_t i = 0; i < shifted->waypoints.size(); ++i)
        if (shifted->waypoints[i].phase != Phase::Wrap)
            CHECK((shifted->waypoints[i].p - plan.trajectory.waypoints[i].p).norm() == 0.0);
}

TEST_CASE("shift_waypoints gives up on a sphere engulfing the bore") {
    EffectorModel e;
    auto plan = plan_wrap_trajectory(sample_pose(), {}, e, 0.05);
    Point3 mid = plan.wrap_curve.evaluate(0.5);
    // radius well past the bore: every recentering still collides
    std::vector<pheno::FruitSphere> spheres{{{mid.x, mid.y, mid.z}, 0.25, 0.0}};
    CHECK_FALSE(shift_waypoints(plan.trajectory, plan.wrap_curve, spheres, e, 0.01).has_value());
    CHECK_THROWS_AS(shift_waypoints(plan.trajectory, plan.wrap_curve, spheres, e, 0.01, -1.0, 10),
                    DomainError);
}

namespace {

StateStatus drive(std::initializer_list<EventType> events, const EffectorModel& e,
                  double sp_offset = 0.0) {
    StateStatus s;
    for (EventType t : events) {
        Event ev;
        ev.type = t;
        ev.sp_offset = sp_offset;
        s = step_harvest(s, ev, e);
    }
    return s;
}

}  // namespace

TEST_CASE("step_harvest happy path reaches Severed") {
    EffectorModel e;
    auto s = drive({EventType::Start, EventType::Positioned, EventType::Wrapped,
                    EventType::ReachedSP, EventType::Cut},
                   e, e.blade_slot_width / 2.0);  // boundary offset still cuts
    CHECK(s.state == HarvestState::Severed);
    CHECK_FALSE(s.reason.has_value());
}

TEST_CASE("step_harvest cut outside the blade slot fails as a pose error") {
    EffectorModel e;
    auto s = drive({EventType::Start, EventType::Positioned, EventType::Wrapped,
                    EventType::ReachedSP, EventType::Cut},
                   e, e.blade_slot_width / 2.0 + 1e-6);
    CHECK(s.state == HarvestState::Failed);
    CHECK(s.reason == FailureReason::PoseError);
}

TEST_CASE("step_harvest abort carries its reason from any active state") {
    EffectorModel e;
    Event abort;
    abort.type = EventType::Abort;
    abort.abort_reason = FailureReason::CollisionDisplacement;
    std::vector<std::vector<EventType>> prefixes{
        {EventType::Start},
        {EventType::Start, EventType::Positioned},
        {EventType::Start, EventType::Positioned, EventType::Wrapped},
        {EventType::Start, EventType::Positioned, EventType::Wrapped, EventType::ReachedSP}};
    for (const auto& prefix : prefixes) {
        StateStatus s;
        for (EventType t : prefix) s = step_harvest(s, {t, 0.0, {}}, e);
        s = step_harvest(s, abort, e);
        CHECK(s.state == HarvestState::Failed);
        CHECK(s.reason == FailureReason::CollisionDisplacement);
    }
}

TEST_CASE("step_harvest rejects illegal transitions") {
    EffectorModel e;
    StateStatus idle;
    CHECK_THROWS_AS(step_harvest(idle, {EventType::Cut, 0.0, {}}, e), ProtocolError);
    CHECK_THROWS_AS(step_harvest(idle, {EventType::Abort, 0.0, {}}, e), ProtocolError);
    auto severed = drive({EventType::Start, EventType::Positioned, EventType::Wrapped,
                          EventType::ReachedSP, EventType::Cut},
                         e);
    CHECK_THROWS_AS(step_harvest(severed, {EventType::Start, 0.0, {}}, e), ProtocolError);
    CHECK_THROWS_AS(step_harvest(severed, {EventType::Abort, 0.0, {}}, e), ProtocolError);
}

TEST_CASE("every legal run terminates within five transitions") {
    // breadth-first walk over the reachable (state, event) table
    EffectorModel e;
    std::vector<StateStatus> frontier{StateStatus{}};
    for (int depth = 0; depth < 6; ++depth) {
        std::vector<StateStatus> next;
        for (const auto& s : frontier) {
            for (EventType t : {EventType::Start, EventType::Positioned, EventType::Wrapped,
                                EventType::ReachedSP, EventType::Cut, EventType::Abort}) {
                try {
                    next.push_back(step_harvest(s, {t, 0.0, FailureReason::PoseError}, e));
                } catch (const ProtocolError&) {
                }
            }
        }
        frontier = std::move(next);
    }
    // after 6 events every surviving run has already ended in a terminal state
    CHECK(frontier.empty());
}
