#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "dextok/geometry.hpp"

namespace dextok::hand {

enum class JointType { revolute, prismatic, fixed };

struct Joint {
  std::string name;
  JointType type = JointType::fixed;
  int parent_link = -1;
  int child_link = -1;
  geom::RigidTransform origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double limit_lo = 0.0;
  double limit_hi = 0.0;
  int q_index = -1;  // -1 for fixed joints
};

/// Joint vector; length equals the chain's dof.
using HandConfiguration = Eigen::VectorXd;

/// Tree of links connected by revolute/prismatic/fixed joints. Immutable
/// after build; q indexing follows the declaration order of non-fixed joints.
class KinematicChain {
 public:
  static KinematicChain build(std::string name, std::vector<std::string> links,
                              std::vector<Joint> joints,
                              const std::vector<std::string>& fingertip_links);

  const std::string& name() const { return name_; }
  int dof() const { return dof_; }
  int link_count() const { return static_cast<int>(links_.size()); }
  int base_link() const { return base_link_; }
  const std::vector<std::string>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<int>& fingertip_links() const { return fingertips_; }
  int fingertip_count() const { return static_cast<int>(fingertips_.size()); }

  /// Index of a link by name; throws DataError when absent.
  int link_index(const std::string& name) const;

  /// Joint indices ordered so a parent link's transform is available before
  /// its children are visited.
  const std::vector<int>& traversal_order() const { return fk_order_; }

  /// Joints on the path from the base to `link`, base side first.
  const std::vector<int>& ancestor_joints(int link) const { return ancestors_[link]; }

 private:
  KinematicChain() = default;

  std::string name_;
  std::vector<std::string> links_;
  std::vector<Joint> joints_;
  std::vector<int> fingertips_;
  std::vector<int> fk_order_;
  std::vector<std::vector<int>> ancestors_;
  int base_link_ = -1;
  int dof_ = 0;
};

struct HandTrajectory {
  std::vector<HandConfiguration> frames;
};

KinematicChain load_chain(const std::string& path);
KinematicChain parse_chain(std::istream& in, const std::string& origin_name);

/// World transform of every link; index matches chain.links().
std::vector<geom::RigidTransform> forward_kinematics(const KinematicChain& chain,
                                                     const HandConfiguration& q);

std::vector<Eigen::Vector3d> fingertip_positions(const KinematicChain& chain,
                                                 const HandConfiguration& q);

/// 3 x dof position Jacobian of fingertip `i` in the world frame.
Eigen::MatrixXd fingertip_jacobian(const KinematicChain& chain, const HandConfiguration& q,
                                   int fingertip);

HandConfiguration clamp_to_limits(const KinematicChain& chain, const HandConfiguration& q);

}  // namespace dextok::hand
