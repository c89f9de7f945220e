#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harvest/clustering.hpp"
#include "harvest/geometry.hpp"
#include "harvest/phenotyping.hpp"
#include "harvest/planning.hpp"
#include "harvest/pose.hpp"

namespace harvest::sim {

struct SceneParams {
    int truss_count = 1;
    std::vector<pose::OrientationClass> orientation_cycle{pose::OrientationClass::Front,
                                                          pose::OrientationClass::Right};
    int fruit_min = 4;
    int fruit_max = 6;
    double ripe_fraction = 1.0;  // probability a generated truss is harvest-ripe
    geom::CameraIntrinsics camera{600.0, 600.0, 320.0, 240.0, 640, 480};

    void validate() const;
};

struct TrussTruth {
    int id = 0;
    pose::OrientationClass orientation = pose::OrientationClass::Front;
    pose::PedicelPose3 keypoints;
    std::vector<pheno::FruitSphere> spheres;            // terminal fruit last
    std::vector<pheno::MaturityStage> maturities;       // parallel to spheres
};

struct SyntheticScene {
    std::uint64_t seed = 0;
    geom::CameraIntrinsics camera;
    std::vector<TrussTruth> trusses;
    std::vector<pheno::Detection> detections;
    geom::PointCloud cloud;
};

// Quadratic droop in the vertical plane between two keypoints; u in [0,1].
Point3 droop_point(const Point3& a, const Point3& b, double sag, double u);
// Arc length of the droop curve from u=0 to u.
double droop_arc_length(const Point3& a, const Point3& b, double sag, double u);
// Parameter at the given arc-length fraction of the full droop curve.
double droop_u_at_fraction(const Point3& a, const Point3& b, double sag, double fraction);

SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params);

struct NoiseModel {
    double keypoint_sigma = 0.0;       // meters, isotropic on 3D keypoints
    double depth_sigma = 0.0;          // meters, on perceived sphere depth
    double maturity_flip_prob = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct TimeModel {
    double position_s = 4.0;
    double wrap_s = 6.0;
    double approach_s = 2.0;
    double cut_s = 5.0;
    double travel_speed = 0.15;  // m/s along the waypoint path
};

struct Policy {
    plan::EffectorModel effector;
    plan::Workspace workspace;
    double collision_clearance = 0.005;
    double shift_step = 0.01;
    int shift_max_iters = 10;
    double inward_margin = 0.05;
    double max_step = 0.05;
    int attempt_limit = 1;  // 1 = continuous mode, 3 = controlled mode
    TimeModel time;
};

struct EpisodeRecord {
    int truss_id = 0;
    pose::OrientationClass pose_class = pose::OrientationClass::Front;
    bool attempted = false;
    std::optional<plan::RejectReason> rejected;
    std::optional<bool> sp_identified;  // nullopt = N/A
    std::optional<bool> wrapped;
    std::optional<bool> detached;       // N/A unless the wrap succeeded
    bool harvested = false;
    std::optional<plan::FailureReason> failure;
    std::optional<double> time_s;

    void validate() const;
};

EpisodeRecord run_episode(const TrussTruth& truss, const NoiseModel& noise, const Policy& policy,
                          int episode_index);

struct StageCount {
    int successes = 0;
    int attempts = 0;

    bool empty() const { return attempts == 0; }
};

struct ReportRow {
    std::string label;
    StageCount sp, wrapped, detached, harvested;
    std::optional<double> mean_time_s;  // over harvested records
};

struct Report {
    std::vector<ReportRow> rows;  // per pose class, in enum order
    ReportRow footer;
    int rejected_count = 0;
};

Report aggregate_report(const std::vector<EpisodeRecord>& records);

// "93.33% (14/15)" with round-half-up to two decimals; "-" when empty.
std::string format_rate(const StageCount& c);
std::string render_markdown(const Report& report);
std::string render_csv(const Report& report);

}  // namespace harvest::sim
