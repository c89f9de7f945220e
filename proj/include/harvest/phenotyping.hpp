#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "harvest/clustering.hpp"
#include "harvest/geometry.hpp"
#include "harvest/pose.hpp"

namespace harvest::pheno {

// Agronomic maturity stages, ordered.
enum class MaturityStage { GreenMature = 0, Turning = 1, Ripe = 2, FullyRipe = 3 };
const char* maturity_name(MaturityStage s);
std::optional<MaturityStage> maturity_from_name(const std::string& name);

enum class DetectionClass { Truss, Fruit };

struct Detection {
    int id = 0;
    DetectionClass cls = DetectionClass::Fruit;
    cluster::BBox bbox;
    double confidence = 1.0;
    std::optional<MaturityStage> maturity;  // fruits only

    void validate() const;
};

double iou(const cluster::BBox& a, const cluster::BBox& b);

enum class AssignState { Assigned, Ambiguous, Unassigned };

struct FruitAssignment {
    int fruit_id = 0;
    AssignState state = AssignState::Unassigned;
    int truss_id = -1;               // valid when Assigned
    std::vector<int> candidates;     // trusses above threshold when Ambiguous
};

// Max-IOU assignment with a runner-up ambiguity rule: a fruit overlapping
// two trusses above iou_min cannot be decided in 2D.
std::vector<FruitAssignment> associate_fruits_2d(const std::vector<Detection>& fruits,
                                                 const std::vector<Detection>& trusses,
                                                 double iou_min = 0.5);

struct TrussClusterInfo {
    int truss_id = -1;
    std::vector<int> anchor_cluster_ids;  // clusters of fruits already uniquely assigned
    double cluster_median_depth = 0.0;
};

// 3D tie-break for an ambiguous fruit. Returns the owning truss id, or
// nullopt when the fruit seed was never reached by clustering.
std::optional<int> disambiguate_3d(int fruit_cluster_id, double fruit_seed_depth,
                                   const std::vector<TrussClusterInfo>& candidates);

struct FruitSphere {
    Point3 center;
    double radius = 0.0;
    double volume = 0.0;
};

struct FruitInfo {
    int fruit_id = 0;
    std::optional<Point3> sphere_center;  // for the EP-proximity rule
    Pixel bbox_center;                    // fallback: lowest fruit in the image
};

// Terminal fruit: nearest sphere center to EP when a pose is available,
// otherwise the fruit lowest in the image. Ties go to the lower id.
int identify_terminal_fruit(const std::vector<FruitInfo>& fruits,
                            const pose::PedicelPose3* pose_3d);

// Truss harvestability: terminal fruit at least Turning and every other
// fruit at least Ripe.
bool truss_maturity(const std::vector<MaturityStage>& maturities, std::size_t terminal_index);

FruitSphere estimate_fruit_sphere(const Detection& fruit, double depth,
                                  const geom::CameraIntrinsics& K);

struct TrussPhenotype {
    int truss_id = 0;
    std::vector<int> fruit_ids;
    std::vector<MaturityStage> fruit_maturities;
    int terminal_fruit_id = -1;
    std::vector<FruitSphere> fruit_spheres;
    bool overall_ripe = false;
    int fruit_count = 0;

    double median_volume() const;
};

using DepthLookup = std::function<std::optional<double>(const Pixel&)>;

TrussPhenotype build_phenotype(const Detection& truss, const std::vector<Detection>& fruits,
                               const DepthLookup& depth_at, const pose::PedicelPose3* pose_3d,
                               const geom::CameraIntrinsics& K);

// Config-driven quality grade on top of the binary harvestable verdict.
struct QualityPolicy {
    int premium_min_fruit_count = 5;
    double premium_min_median_volume = 2.0e-5;  // m^3
    int standard_min_fruit_count = 3;
};

enum class QualityGrade { Premium, Standard, Substandard };
QualityGrade quality_grade(const TrussPhenotype& phenotype, const QualityPolicy& policy);

}  // namespace harvest::pheno
