#include "dextok/handmodel.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dextok/common.hpp"

namespace dextok::hand {

namespace {

void check_dof(const KinematicChain& chain, const HandConfiguration& q) {
  if (q.size() != chain.dof())
    throw DataError("hand: configuration has " + std::to_string(q.size()) +
                    " entries, chain dof is " + std::to_string(chain.dof()));
}

geom::RigidTransform joint_motion(const Joint& j, double value) {
  switch (j.type) {
    case JointType::revolute:
      return geom::RigidTransform::rotate_axis_angle(j.axis, value);
    case JointType::prismatic:
      return geom::RigidTransform::translate(j.axis * value);
    case JointType::fixed:
      return geom::RigidTransform::identity();
  }
  return geom::RigidTransform::identity();
}

}  // namespace

KinematicChain KinematicChain::build(std::string name, std::vector<std::string> links,
                                     std::vector<Joint> joints,
                                     const std::vector<std::string>& fingertip_links) {
  KinematicChain chain;
  chain.name_ = std::move(name);
  chain.links_ = std::move(links);
  chain.joints_ = std::move(joints);

  const int n_links = static_cast<int>(chain.links_.size());
  if (n_links == 0) throw DataError("hand: model declares no links");

  std::map<std::string, int> by_name;
  for (int i = 0; i < n_links; ++i) {
    if (!by_name.emplace(chain.links_[i], i).second)
      throw DataError("hand: duplicate link '" + chain.links_[i] + "'");
  }

  std::vector<int> parent_joint(n_links, -1);
  int dof = 0;
  for (std::size_t ji = 0; ji < chain.joints_.size(); ++ji) {
    Joint& j = chain.joints_[ji];
    if (j.parent_link < 0 || j.parent_link >= n_links || j.child_link < 0 ||
        j.child_link >= n_links)
      throw DataError("hand: joint '" + j.name + "' references an unknown link");
    if (j.type != JointType::fixed) {
      const double norm_err = std::abs(j.axis.norm() - 1.0);
      if (norm_err > 1e-6)
        throw DataError("hand: joint '" + j.name + "' axis is not unit length");
      j.axis.normalize();
      if (j.limit_lo > j.limit_hi)
        throw DataError("hand: joint '" + j.name + "' has limit_lo > limit_hi");
      j.q_index = dof++;
    } else {
      j.q_index = -1;
    }
    if (parent_joint[j.child_link] != -1)
      throw DataError("hand: link '" + chain.links_[j.child_link] +
                      "' has more than one parent joint (cycle or reparent)");
    parent_joint[j.child_link] = static_cast<int>(ji);
  }
  chain.dof_ = dof;

  int base = -1;
  for (int i = 0; i < n_links; ++i) {
    if (parent_joint[i] == -1) {
      if (base != -1)
        throw DataError("hand: multiple root links ('" + chain.links_[base] + "', '" +
                        chain.links_[i] + "'); joint graph must be a single tree");
      base = i;
    }
  }
  if (base == -1) throw DataError("hand: joint graph has a cycle (no root link)");
  chain.base_link_ = base;

  // Parent-first traversal; any joint left unvisited closes a cycle.
  std::vector<bool> link_done(n_links, false);
  link_done[base] = true;
  chain.fk_order_.clear();
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t ji = 0; ji < chain.joints_.size(); ++ji) {
      const Joint& j = chain.joints_[ji];
      if (!link_done[j.child_link] && link_done[j.parent_link]) {
        link_done[j.child_link] = true;
        chain.fk_order_.push_back(static_cast<int>(ji));
        progress = true;
      }
    }
  }
  if (chain.fk_order_.size() != chain.joints_.size())
    throw DataError("hand: joint graph has a cycle");
  for (int i = 0; i < n_links; ++i)
    if (!link_done[i])
      throw DataError("hand: link '" + chain.links_[i] + "' is not connected to the base");

  chain.ancestors_.assign(n_links, {});
  for (int ji : chain.fk_order_) {
    const Joint& j = chain.joints_[ji];
    chain.ancestors_[j.child_link] = chain.ancestors_[j.parent_link];
    chain.ancestors_[j.child_link].push_back(ji);
  }

  if (fingertip_links.empty()) throw DataError("hand: no fingertip links declared");
  for (const std::string& f : fingertip_links) {
    auto it = by_name.find(f);
    if (it == by_name.end()) throw DataError("hand: unknown fingertip link '" + f + "'");
    chain.fingertips_.push_back(it->second);
  }
  return chain;
}

int KinematicChain::link_index(const std::string& name) const {
  for (int i = 0; i < link_count(); ++i)
    if (links_[i] == name) return i;
  throw DataError("hand: unknown link '" + name + "'");
}

KinematicChain load_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("hand: cannot open model file '" + path + "'");
  return parse_chain(in, path);
}

KinematicChain parse_chain(std::istream& in, const std::string& origin_name) {
  std::string name = "hand";
  std::vector<std::string> links;
  std::vector<Joint> joints;
  std::vector<std::string> fingertips;
  std::map<std::string, int> link_ids;

  auto fail = [&](int line_no, const std::string& what) -> void {
    throw DataError("hand: " + origin_name + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  int line_no = 0;
  std::vector<bool> has_axis, has_limits;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;

    if (kw == "hand") {
      if (!(ls >> name)) fail(line_no, "expected: hand <name>");
    } else if (kw == "link") {
      std::string link_name;
      if (!(ls >> link_name)) fail(line_no, "expected: link <name>");
      if (!link_ids.emplace(link_name, static_cast<int>(links.size())).second)
        fail(line_no, "duplicate link '" + link_name + "'");
      links.push_back(link_name);
    } else if (kw == "joint") {
      std::string jname, jtype, parent, child;
      if (!(ls >> jname >> jtype >> parent >> child))
        fail(line_no, "expected: joint <name> <revolute|prismatic|fixed> <parent> <child>");
      Joint j;
      j.name = jname;
      if (jtype == "revolute")
        j.type = JointType::revolute;
      else if (jtype == "prismatic")
        j.type = JointType::prismatic;
      else if (jtype == "fixed")
        j.type = JointType::fixed;
      else
        fail(line_no, "unknown joint type '" + jtype + "'");
      auto pit = link_ids.find(parent);
      auto cit = link_ids.find(child);
      if (pit == link_ids.end()) fail(line_no, "unknown parent link '" + parent + "'");
      if (cit == link_ids.end()) fail(line_no, "unknown child link '" + child + "'");
      j.parent_link = pit->second;
      j.child_link = cit->second;
      joints.push_back(j);
      has_axis.push_back(false);
      has_limits.push_back(false);
    } else if (kw == "origin") {
      if (joints.empty()) fail(line_no, "origin before any joint");
      Eigen::Matrix4d m;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          if (!(ls >> m(r, c))) fail(line_no, "origin needs 16 numbers (row-major 4x4)");
      try {
        joints.back().origin = geom::RigidTransform::from_matrix(m);
      } catch (const DataError& e) {
        fail(line_no, e.what());
      }
    } else if (kw == "axis") {
      if (joints.empty()) fail(line_no, "axis before any joint");
      Eigen::Vector3d a;
      if (!(ls >> a.x() >> a.y() >> a.z())) fail(line_no, "axis needs 3 numbers");
      joints.back().axis = a;
      has_axis.back() = true;
    } else if (kw == "limits") {
      if (joints.empty()) fail(line_no, "limits before any joint");
      if (!(ls >> joints.back().limit_lo >> joints.back().limit_hi))
        fail(line_no, "limits needs 2 numbers");
      has_limits.back() = true;
    } else if (kw == "fingertips" || kw == "fingertip") {
      std::string f;
      while (ls >> f) fingertips.push_back(f);
    } else {
      fail(line_no, "unknown keyword '" + kw + "'");
    }
  }

  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (joints[i].type == JointType::fixed) continue;
    if (!has_axis[i])
      throw DataError("hand: " + origin_name + ": joint '" + joints[i].name + "' needs an axis");
    if (!has_limits[i])
      throw DataError("hand: " + origin_name + ": joint '" + joints[i].name + "' needs limits");
  }
  try {
    return KinematicChain::build(name, std::move(links), std::move(joints), fingertips);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + origin_name + ")");
  }
}

std::vector<geom::RigidTransform> forward_kinematics(const KinematicChain& chain,
                                                     const HandConfiguration& q) {
  check_dof(chain, q);
  std::vector<geom::RigidTransform> world(chain.link_count());
  world[chain.base_link()] = geom::RigidTransform::identity();
  for (int ji : chain.traversal_order()) {
    const Joint& j = chain.joints()[ji];
    const double value = j.q_index >= 0 ? q[j.q_index] : 0.0;
    world[j.child_link] =
        geom::compose(geom::compose(world[j.parent_link], j.origin), joint_motion(j, value));
  }
  return world;
}

std::vector<Eigen::Vector3d> fingertip_positions(const KinematicChain& chain,
                                                 const HandConfiguration& q) {
  const auto world = forward_kinematics(chain, q);
  std::vector<Eigen::Vector3d> out;
  out.reserve(chain.fingertip_links().size());
  for (int link : chain.fingertip_links()) out.push_back(world[link].translation());
  return out;
}

Eigen::MatrixXd fingertip_jacobian(const KinematicChain& chain, const HandConfiguration& q,
                                   int fingertip) {
  check_dof(chain, q);
  if (fingertip < 0 || fingertip >= chain.fingertip_count())
    throw DataError("hand: fingertip index " + std::to_string(fingertip) + " out of range");

  const auto world = forward_kinematics(chain, q);
  const int tip_link = chain.fingertip_links()[fingertip];
  const Eigen::Vector3d tip = world[tip_link].translation();

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, chain.dof());
  for (int ji : chain.ancestor_joints(tip_link)) {
    const Joint& j = chain.joints()[ji];
    if (j.q_index < 0) continue;
    // Joint frame before motion: world[parent] * origin. Axis and anchor
    // point are invariant to this joint's own value.
    const geom::RigidTransform frame = geom::compose(world[j.parent_link], j.origin);
    const Eigen::Vector3d axis_w = frame.rotation() * j.axis;
    if (j.type == JointType::revolute) {
      jac.col(j.q_index) = axis_w.cross(tip - frame.translation());
    } else {
      jac.col(j.q_index) = axis_w;
    }
  }
  return jac;
}

HandConfiguration clamp_to_limits(const KinematicChain& chain, const HandConfiguration& q) {
  check_dof(chain, q);
  HandConfiguration out = q;
  for (const Joint& j : chain.joints()) {
    if (j.q_index < 0) continue;
    out[j.q_index] = std::clamp(out[j.q_index], j.limit_lo, j.limit_hi);
  }
  return out;
}

}  // namespace dextok::hand
