#pragma once

#include <array>
#include <optional>
#include <vector>

#include "harvest/common.hpp"

namespace harvest::pose {

// Peduncle keypoints in order along the stalk: main-stem junction (SP),
// maximum-curvature point (CP), first-fruit junction (FP), quarter / mid /
// three-quarter points (QP, MP, TQP), and the peduncle end (EP).
enum class KeypointId { SP = 0, CP, FP, QP, MP, TQP, EP };
inline constexpr int kNumKeypoints = 7;
const char* keypoint_name(KeypointId id);

enum class Visibility { Absent = 0, Occluded = 1, Visible = 2 };

struct Keypoint2 {
    Pixel p;
    Visibility vis = Visibility::Absent;
};

struct Keypoint3 {
    Point3 p;
    Visibility vis = Visibility::Absent;
};

struct PedicelKeypointSet {
    std::array<Keypoint2, kNumKeypoints> keypoints;
    std::vector<Pixel> fruit_keypoints;  // opaque payload, unused by OKS
    double object_scale = 0.0;           // truss bbox area, px^2

    const Keypoint2& at(KeypointId id) const { return keypoints[static_cast<int>(id)]; }
    Keypoint2& at(KeypointId id) { return keypoints[static_cast<int>(id)]; }
};

// 3D pose in the camera frame.
struct PedicelPose3 {
    std::array<Keypoint3, kNumKeypoints> keypoints;
    std::vector<Point3> fruit_keypoints;

    const Keypoint3& at(KeypointId id) const { return keypoints[static_cast<int>(id)]; }
    Keypoint3& at(KeypointId id) { return keypoints[static_cast<int>(id)]; }
    bool has(KeypointId id) const { return at(id).vis != Visibility::Absent; }
};

struct SigmaVector {
    std::array<double, kNumKeypoints> values{};

    static constexpr double kFloor = 1e-3;
    static SigmaVector floored(const std::array<double, kNumKeypoints>& raw);
    void validate() const;
};

// COCO-style object keypoint similarity over the labeled gt slots,
// with per-keypoint constant k_i = 2 * sigma_i and s = sqrt(object_scale).
double oks(const PedicelKeypointSet& pred, const PedicelKeypointSet& gt,
           const SigmaVector& sigmas);

double accuracy_at(const std::vector<PedicelKeypointSet>& preds,
                   const std::vector<PedicelKeypointSet>& gts, const SigmaVector& sigmas,
                   double threshold);

struct SigmaEstimate {
    // Per slot: population std-dev of scale-normalized annotator-vs-expert
    // distances, floored at SigmaVector::kFloor; nullopt when fewer than two
    // samples were available (caller must supply a default).
    std::array<std::optional<double>, kNumKeypoints> sigma;
};

SigmaEstimate estimate_sigmas(const std::vector<std::vector<PedicelKeypointSet>>& annotator_sets,
                              const std::vector<PedicelKeypointSet>& expert_gt);

SigmaVector adjust_sigmas(const SigmaVector& sigmas,
                          const std::array<double, kNumKeypoints>& multipliers);

// Direction-dependent harvestability weighting: tighten SP/CP, relax the
// wrap-guidance points.
std::array<double, kNumKeypoints> default_sigma_multipliers();

enum class OrientationClass { Front, Right, Left, Back, Inward };
const char* orientation_name(OrientationClass c);

// Growth vector from SP to the fruit centroid (or EP when no centroid is
// given), projected to the horizontal camera plane. Sector rule:
// |theta| <= 45 deg Front, up to 135 deg Right/Left, else Back; Inward
// overrides when the truss grows away from the robot past `inward_margin`.
OrientationClass classify_orientation(const PedicelPose3& pose,
                                      std::optional<Point3> fruit_centroid,
                                      double inward_margin = 0.05);

}  // namespace harvest::pose
