#pragma once

#include <string>
#include <vector>

#include "harvest/geometry.hpp"
#include "harvest/phenotyping.hpp"
#include "harvest/planning.hpp"
#include "harvest/pose.hpp"
#include "harvest/sim.hpp"

namespace harvest::io {

// File loaders; ParseError messages carry the file name and, where
// applicable, the line or field that failed.
geom::CameraIntrinsics load_intrinsics(const std::string& path);
geom::PointCloud load_cloud(const std::string& path);  // ascii "x y z [u v]"
std::vector<pheno::Detection> load_detections(const std::string& path);
std::vector<pose::PedicelKeypointSet> load_keypoint_annotations(const std::string& path);
std::vector<std::vector<pose::PedicelKeypointSet>> load_annotator_sets(const std::string& path);
pose::SigmaVector load_sigmas(const std::string& path);
std::array<double, pose::kNumKeypoints> load_multipliers(const std::string& path);
pose::PedicelPose3 load_pose3(const std::string& path);
std::vector<pheno::FruitSphere> load_spheres(const std::string& path);
plan::EffectorModel load_effector(const std::string& path);
sim::NoiseModel load_noise(const std::string& path);
sim::Policy load_policy(const std::string& path);
std::vector<sim::EpisodeRecord> load_records(const std::string& path);

std::string phenotypes_to_json(const std::vector<pheno::TrussPhenotype>& phenotypes);
std::string trajectory_to_json(const plan::Trajectory& traj);
std::string records_to_json(const std::vector<sim::EpisodeRecord>& records);
std::string report_to_json(const sim::Report& report);

}  // namespace harvest::io
