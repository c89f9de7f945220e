#include "harvest/phenotyping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace harvest::pheno {

const char* maturity_name(MaturityStage s) {
    static const char* names[] = {"green_mature", "turning", "ripe", "fully_ripe"};
    return names[static_cast<int>(s)];
}

std::optional<MaturityStage> maturity_from_name(const std::string& name) {
    for (int i = 0; i < 4; ++i)
        if (name == maturity_name(static_cast<MaturityStage>(i)))
            return static_cast<MaturityStage>(i);
    return std::nullopt;
}

void Detection::validate() const {
    bbox.validate();
    if (confidence < 0.0 || confidence > 1.0)
        throw DomainError("detection: confidence outside [0,1]");
    if ((cls == DetectionClass::Fruit) != maturity.has_value())
        throw DomainError("detection: maturity present iff class is fruit");
}

double iou(const cluster::BBox& a, const cluster::BBox& b) {
    a.validate();
    b.validate();
    double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return inter / uni;
}

std::vector<FruitAssignment> associate_fruits_2d(const std::vector<Detection>& fruits,
                                                 const std::vector<Detection>& trusses,
                                                 double iou_min) {
    for (const auto& f : fruits)
        if (f.cls != DetectionClass::Fruit) throw DomainError("associate: non-fruit in fruit list");
    for (const auto& t : trusses)
        if (t.cls != DetectionClass::Truss) throw DomainError("associate: non-truss in truss list");

    std::vector<FruitAssignment> out;
    out.reserve(fruits.size());
    for (const auto& fruit : fruits) {
        FruitAssignment a;
        a.fruit_id = fruit.id;
        for (const auto& truss : trusses)
            if (iou(fruit.bbox, truss.bbox) >= iou_min) a.candidates.push_back(truss.id);
        if (a.candidates.size() == 1) {
            a.state = AssignState::Assigned;
            a.truss_id = a.candidates.front();
        } else if (a.candidates.size() >= 2) {
            a.state = AssignState::Ambiguous;
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::optional<int> disambiguate_3d(int fruit_cluster_id, double fruit_seed_depth,
                                   const std::vector<TrussClusterInfo>& candidates) {
    if (fruit_cluster_id < 0) return std::nullopt;  // seed unreached by clustering
    std::vector<const TrussClusterInfo*> matches;
    for (const auto& c : candidates) {
        if (std::find(c.anchor_cluster_ids.begin(), c.anchor_cluster_ids.end(),
                      fruit_cluster_id) != c.anchor_cluster_ids.end())
            matches.push_back(&c);
    }
    if (matches.size() == 1) return matches.front()->truss_id;
    // Zero or several anchor matches: fall back to nearest cluster depth.
    const TrussClusterInfo* best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
        double gap = std::abs(c.cluster_median_depth - fruit_seed_depth);
        if (gap < best_gap) { best_gap = gap; best = &c; }
    }
    if (!best) return std::nullopt;
    return best->truss_id;
}

int identify_terminal_fruit(const std::vector<FruitInfo>& fruits,
                            const pose::PedicelPose3* pose_3d) {
    if (fruits.empty()) throw DomainError("identify_terminal_fruit: no fruits");

    if (pose_3d && pose_3d->has(pose::KeypointId::EP)) {
        Point3 ep = pose_3d->at(pose::KeypointId::EP).p;
        const FruitInfo* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& f : fruits) {
            if (!f.sphere_center) continue;
            double d = (*f.sphere_center - ep).norm();
            if (d < best_d || (d == best_d && best && f.fruit_id < best->fruit_id)) {
                best_d = d;
                best = &f;
            }
        }
        if (best) return best->fruit_id;
    }
    // Fallback: lowest fruit in the image (largest v).
    const FruitInfo* best = &fruits.front();
    for (const auto& f : fruits) {
        if (f.bbox_center.v > best->bbox_center.v ||
            (f.bbox_center.v == best->bbox_center.v && f.fruit_id < best->fruit_id))
            best = &f;
    }
    return best->fruit_id;
}

bool truss_maturity(const std::vector<MaturityStage>& maturities, std::size_t terminal_index) {
    if (maturities.empty()) throw DomainError("truss_maturity: no fruits");
    if (terminal_index >= maturities.size())
        throw DomainError("truss_maturity: terminal index out of range");
    if (maturities[terminal_index] < MaturityStage::Turning) return false;
    for (std::size_t i = 0; i < maturities.size(); ++i) {
        if (i == terminal_index) continue;
        if (maturities[i] < MaturityStage::Ripe) return false;
    }
    return true;
}

FruitSphere estimate_fruit_sphere(const Detection& fruit, double depth,
                                  const geom::CameraIntrinsics& K) {
    fruit.validate();
    if (depth <= 0.0) throw DomainError("estimate_fruit_sphere: depth must be positive");
    // The averaged bbox extent is the circle's diameter, so the pixel
    // radius is (w + h) / 4; keeps the sphere inside the bbox.
    double r_px = (fruit.bbox.width() + fruit.bbox.height()) / 4.0;
    FruitSphere s;
    s.center = geom::backproject(fruit.bbox.center(), depth, K);
    s.radius = geom::pixel_radius_to_metric(r_px, depth, K);
    s.volume = 4.0 / 3.0 * M_PI * s.radius * s.radius * s.radius;
    return s;
}

double TrussPhenotype::median_volume() const {
    if (fruit_spheres.empty()) return 0.0;
    std::vector<double> vols;
    vols.reserve(fruit_spheres.size());
    for (const auto& s : fruit_spheres) vols.push_back(s.volume);
    std::sort(vols.begin(), vols.end());
    return vols[(vols.size() - 1) / 2];
}

TrussPhenotype build_phenotype(const Detection& truss, const std::vector<Detection>& fruits,
                               const DepthLookup& depth_at, const pose::PedicelPose3* pose_3d,
                               const geom::CameraIntrinsics& K) {
    if (truss.cls != DetectionClass::Truss) throw DomainError("build_phenotype: not a truss");
    if (fruits.empty()) throw EmptyTrussError("build_phenotype: truss has no assigned fruits");

    TrussPhenotype ph;
    ph.truss_id = truss.id;
    std::vector<FruitInfo> infos;
    for (const auto& f : fruits) {
        f.validate();
        ph.fruit_ids.push_back(f.id);
        ph.fruit_maturities.push_back(*f.maturity);
        auto depth = depth_at(f.bbox.center());
        if (!depth) throw DomainError("build_phenotype: no depth at fruit bbox center");
        FruitSphere s = estimate_fruit_sphere(f, *depth, K);
        ph.fruit_spheres.push_back(s);
        infos.push_back({f.id, s.center, f.bbox.center()});
    }
    ph.fruit_count = static_cast<int>(fruits.size());
    ph.terminal_fruit_id = identify_terminal_fruit(infos, pose_3d);
    std::size_t terminal_index =
        std::find(ph.fruit_ids.begin(), ph.fruit_ids.end(), ph.terminal_fruit_id) -
        ph.fruit_ids.begin();
    ph.overall_ripe = truss_maturity(ph.fruit_maturities, terminal_index);
    return ph;
}

QualityGrade quality_grade(const TrussPhenotype& phenotype, const QualityPolicy& policy) {
    if (phenotype.fruit_count >= policy.premium_min_fruit_count &&
        phenotype.median_volume() >= policy.premium_min_median_volume)
        return QualityGrade::Premium;
    if (phenotype.fruit_count >= policy.standard_min_fruit_count)
        return QualityGrade::Standard;
    return QualityGrade::Substandard;
}

}  // namespace harvest::pheno
