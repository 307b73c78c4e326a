#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dextok/geometry.hpp"
#include "dextok/handmodel.hpp"
#include "dextok/pointcloud.hpp"

namespace dextok::fixtures {

// Demo chains, also written as .hand files by generate_all.
hand::KinematicChain one_dof_chain();
hand::KinematicChain planar_two_link_chain(double l1 = 0.4, double l2 = 0.3);
hand::KinematicChain gripper3_chain();  // 3 fingers x (shoulder + elbow), 6 dof
hand::KinematicChain hand20_chain();    // 5 fingers x 4 revolute joints

std::string chain_to_text(const hand::KinematicChain& chain);

/// Unit-sphere cloud: points at radius 1 with exact radial normals.
cloud::OrientedPointCloud sphere_cloud(int count, std::uint64_t seed);

/// Joint values putting every gripper3 fingertip at the given radius from the
/// sphere center (tips on the equator, one per finger direction).
hand::HandConfiguration gripper3_pose_at_radius(double radius);

/// Canonical grasp start: fingertips 5 mm outside the unit sphere.
hand::HandConfiguration sphere_grasp_qgen();

std::vector<std::vector<Eigen::VectorXd>> sinusoid_dataset(int sequences, int frames, int dof,
                                                           std::uint64_t seed);

/// Well-conditioned per-frame mixing matrix for the paired-morphology fixture.
Eigen::MatrixXd mixing_matrix(int dof, std::uint64_t seed);

std::uint64_t fnv1a64(const std::string& bytes);

/// Writes the full fixture tree (hands/, clouds/, grasp/, retarget/, vq/) and
/// a manifest.json with per-file checksums. Deterministic for a fixed seed.
void generate_all(const std::string& out_dir, std::uint64_t seed);

}  // namespace dextok::fixtures
