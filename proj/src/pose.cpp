#include "harvest/pose.hpp"

#include <algorithm>
#include <cmath>

namespace harvest::pose {

const char* keypoint_name(KeypointId id) {
    static const char* names[] = {"SP", "CP", "FP", "QP", "MP", "TQP", "EP"};
    return names[static_cast<int>(id)];
}

const char* orientation_name(OrientationClass c) {
    static const char* names[] = {"front", "right", "left", "back", "inward"};
    return names[static_cast<int>(c)];
}

SigmaVector SigmaVector::floored(const std::array<double, kNumKeypoints>& raw) {
    SigmaVector out;
    for (int i = 0; i < kNumKeypoints; ++i) out.values[i] = std::max(raw[i], kFloor);
    return out;
}

void SigmaVector::validate() const {
    for (double v : values)
        if (!(v > 0.0)) throw DomainError("sigmas: all entries must be positive");
}

double oks(const PedicelKeypointSet& pred, const PedicelKeypointSet& gt,
           const SigmaVector& sigmas) {
    sigmas.validate();
    if (gt.object_scale <= 0.0) throw DomainError("oks: object_scale must be positive");
    double s2 = gt.object_scale;  // s = sqrt(area), so s^2 = area
    double sum = 0.0;
    int labeled = 0;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (gt.keypoints[i].vis == Visibility::Absent) continue;
        double du = pred.keypoints[i].p.u - gt.keypoints[i].p.u;
        double dv = pred.keypoints[i].p.v - gt.keypoints[i].p.v;
        double k = 2.0 * sigmas.values[i];
        sum += std::exp(-(du * du + dv * dv) / (2.0 * s2 * k * k));
        ++labeled;
    }
    if (labeled == 0) throw DomainError("oks: ground truth has no labeled keypoints");
    return sum / labeled;
}

double accuracy_at(const std::vector<PedicelKeypointSet>& preds,
                   const std::vector<PedicelKeypointSet>& gts, const SigmaVector& sigmas,
                   double threshold) {
    if (preds.size() != gts.size()) throw DomainError("accuracy_at: list length mismatch");
    if (preds.empty()) throw DomainError("accuracy_at: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (oks(preds[i], gts[i], sigmas) >= threshold) ++hits;
    return static_cast<double>(hits) / preds.size();
}

SigmaEstimate estimate_sigmas(const std::vector<std::vector<PedicelKeypointSet>>& annotator_sets,
                              const std::vector<PedicelKeypointSet>& expert_gt) {
    for (const auto& set : annotator_sets)
        if (set.size() != expert_gt.size())
            throw DomainError("estimate_sigmas: annotator set not aligned with expert gt");

    SigmaEstimate out;
    for (int k = 0; k < kNumKeypoints; ++k) {
        std::vector<double> samples;
        for (const auto& set : annotator_sets) {
            for (std::size_t obj = 0; obj < expert_gt.size(); ++obj) {
                const auto& e = expert_gt[obj].keypoints[k];
                const auto& a = set[obj].keypoints[k];
                if (e.vis == Visibility::Absent || a.vis == Visibility::Absent) continue;
                if (expert_gt[obj].object_scale <= 0.0)
                    throw DomainError("estimate_sigmas: expert object_scale must be positive");
                double s = std::sqrt(expert_gt[obj].object_scale);
                double du = a.p.u - e.p.u, dv = a.p.v - e.p.v;
                samples.push_back(std::sqrt(du * du + dv * dv) / s);
            }
        }
        if (samples.size() < 2) continue;  // Unestimable
        double mean = 0.0;
        for (double v : samples) mean += v;
        mean /= samples.size();
        double var = 0.0;
        for (double v : samples) var += (v - mean) * (v - mean);
        var /= samples.size();  // population formula
        out.sigma[k] = std::max(std::sqrt(var), SigmaVector::kFloor);
    }
    return out;
}

SigmaVector adjust_sigmas(const SigmaVector& sigmas,
                          const std::array<double, kNumKeypoints>& multipliers) {
    sigmas.validate();
    std::array<double, kNumKeypoints> raw;
    for (int i = 0; i < kNumKeypoints; ++i) {
        if (!(multipliers[i] > 0.0)) throw DomainError("adjust_sigmas: multipliers must be positive");
        raw[i] = sigmas.values[i] * multipliers[i];
    }
    return SigmaVector::floored(raw);
}

std::array<double, kNumKeypoints> default_sigma_multipliers() {
    // SP, CP, FP, QP, MP, TQP, EP
    return {0.5, 0.5, 1.0, 1.5, 1.5, 1.5, 1.5};
}

OrientationClass classify_orientation(const PedicelPose3& pose,
                                      std::optional<Point3> fruit_centroid,
                                      double inward_margin) {
    if (!pose.has(KeypointId::SP))
        throw DomainError("classify_orientation: SP keypoint missing");
    Point3 tip;
    if (fruit_centroid) {
        tip = *fruit_centroid;
    } else if (pose.has(KeypointId::EP)) {
        tip = pose.at(KeypointId::EP).p;
    } else {
        throw DomainError("classify_orientation: need fruit centroid or EP keypoint");
    }
    Vec3 g = tip - pose.at(KeypointId::SP).p;
    if (g.z > inward_margin) return OrientationClass::Inward;
    double theta = std::atan2(g.x, -g.z) * 180.0 / M_PI;
    if (std::abs(theta) <= 45.0) return OrientationClass::Front;
    if (theta > 45.0 && theta <= 135.0) return OrientationClass::Right;
    if (theta >= -135.0 && theta < -45.0) return OrientationClass::Left;
    return OrientationClass::Back;
}

}  // namespace harvest::pose
