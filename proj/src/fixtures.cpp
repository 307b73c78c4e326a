#include "dextok/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dextok/common.hpp"
#include "dextok/io.hpp"
#include "dextok/retarget.hpp"

namespace dextok::fixtures {

namespace {

constexpr double kPi = 3.14159265358979323846;

hand::Joint make_joint(std::string name, hand::JointType type, int parent, int child,
                       const geom::RigidTransform& origin, const Eigen::Vector3d& axis,
                       double lo, double hi) {
  hand::Joint j;
  j.name = std::move(name);
  j.type = type;
  j.parent_link = parent;
  j.child_link = child;
  j.origin = origin;
  j.axis = axis;
  j.limit_lo = lo;
  j.limit_hi = hi;
  return j;
}

geom::RigidTransform rot_z(double angle) {
  return geom::RigidTransform::rotate_axis_angle(Eigen::Vector3d::UnitZ(), angle);
}

geom::RigidTransform trans(double x, double y, double z) {
  return geom::RigidTransform::translate({x, y, z});
}

constexpr double kGripperL1 = 0.7;
constexpr double kGripperL2 = 0.6;

}  // namespace

hand::KinematicChain one_dof_chain() {
  std::vector<std::string> links = {"base", "arm", "tip"};
  std::vector<hand::Joint> joints;
  joints.push_back(make_joint("j1", hand::JointType::revolute, 0, 1,
                              geom::RigidTransform::identity(), Eigen::Vector3d::UnitZ(), -kPi,
                              kPi));
  joints.push_back(make_joint("arm_to_tip", hand::JointType::fixed, 1, 2, trans(0.3, 0, 0),
                              Eigen::Vector3d::UnitZ(), 0, 0));
  return hand::KinematicChain::build("one_dof", std::move(links), std::move(joints), {"tip"});
}

hand::KinematicChain planar_two_link_chain(double l1, double l2) {
  std::vector<std::string> links = {"base", "upper", "fore", "tip"};
  std::vector<hand::Joint> joints;
  joints.push_back(make_joint("j1", hand::JointType::revolute, 0, 1,
                              geom::RigidTransform::identity(), Eigen::Vector3d::UnitZ(), -kPi,
                              kPi));
  joints.push_back(make_joint("j2", hand::JointType::revolute, 1, 2, trans(l1, 0, 0),
                              Eigen::Vector3d::UnitZ(), -kPi, kPi));
  joints.push_back(make_joint("fore_to_tip", hand::JointType::fixed, 2, 3, trans(l2, 0, 0),
                              Eigen::Vector3d::UnitZ(), 0, 0));
  return hand::KinematicChain::build("planar_two_link", std::move(links), std::move(joints),
                                     {"tip"});
}

hand::KinematicChain gripper3_chain() {
  std::vector<std::string> links = {"palm"};
  std::vector<hand::Joint> joints;
  std::vector<std::string> tips;
  for (int f = 0; f < 3; ++f) {
    const std::string fp = "f" + std::to_string(f);
    const int palm = 0;
    const int root = static_cast<int>(links.size());
    links.push_back(fp + "_root");
    links.push_back(fp + "_upper");
    links.push_back(fp + "_fore");
    links.push_back(fp + "_tip");
    const double azimuth = 2.0 * kPi * f / 3.0;
    joints.push_back(make_joint(fp + "_mount", hand::JointType::fixed, palm, root,
                                rot_z(azimuth), Eigen::Vector3d::UnitZ(), 0, 0));
    joints.push_back(make_joint(fp + "_shoulder", hand::JointType::revolute, root, root + 1,
                                geom::RigidTransform::identity(), Eigen::Vector3d::UnitY(), -kPi,
                                kPi));
    joints.push_back(make_joint(fp + "_elbow", hand::JointType::revolute, root + 1, root + 2,
                                trans(kGripperL1, 0, 0), Eigen::Vector3d::UnitY(), -kPi, kPi));
    joints.push_back(make_joint(fp + "_end", hand::JointType::fixed, root + 2, root + 3,
                                trans(kGripperL2, 0, 0), Eigen::Vector3d::UnitZ(), 0, 0));
    tips.push_back(fp + "_tip");
  }
  return hand::KinematicChain::build("gripper3", std::move(links), std::move(joints), tips);
}

hand::KinematicChain hand20_chain() {
  std::vector<std::string> links = {"palm"};
  std::vector<hand::Joint> joints;
  std::vector<std::string> tips;
  const double lengths[4] = {0.04, 0.03, 0.025, 0.02};
  for (int f = 0; f < 5; ++f) {
    const std::string fp = "finger" + std::to_string(f);
    const int palm = 0;
    const int base = static_cast<int>(links.size());
    links.push_back(fp + "_base");
    for (int s = 1; s <= 4; ++s) links.push_back(fp + "_seg" + std::to_string(s));
    links.push_back(fp + "_tip");

    const double spread = (f - 2.0) * 0.35;
    joints.push_back(make_joint(fp + "_mount", hand::JointType::fixed, palm, base,
                                geom::compose(rot_z(spread), trans(0.03, 0, 0)),
                                Eigen::Vector3d::UnitZ(), 0, 0));
    for (int s = 0; s < 4; ++s) {
      const geom::RigidTransform origin =
          s == 0 ? geom::RigidTransform::identity() : trans(lengths[s - 1], 0, 0);
      joints.push_back(make_joint(fp + "_j" + std::to_string(s + 1), hand::JointType::revolute,
                                  base + s, base + s + 1, origin, Eigen::Vector3d::UnitY(), -1.6,
                                  1.6));
    }
    joints.push_back(make_joint(fp + "_end", hand::JointType::fixed, base + 4, base + 5,
                                trans(lengths[3], 0, 0), Eigen::Vector3d::UnitZ(), 0, 0));
    tips.push_back(fp + "_tip");
  }
  return hand::KinematicChain::build("hand20", std::move(links), std::move(joints), tips);
}

std::string chain_to_text(const hand::KinematicChain& chain) {
  std::ostringstream out;
  out << "hand " << chain.name() << "\n";
  for (const std::string& link : chain.links()) out << "link " << link << "\n";
  for (const hand::Joint& j : chain.joints()) {
    const char* type = j.type == hand::JointType::revolute    ? "revolute"
                       : j.type == hand::JointType::prismatic ? "prismatic"
                                                              : "fixed";
    out << "joint " << j.name << " " << type << " " << chain.links()[j.parent_link] << " "
        << chain.links()[j.child_link] << "\n";
    const Eigen::Matrix4d m = j.origin.matrix();
    out << "origin";
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out << " " << io::fmt_double(m(r, c));
    out << "\n";
    if (j.type != hand::JointType::fixed) {
      out << "axis " << io::fmt_double(j.axis.x()) << " " << io::fmt_double(j.axis.y()) << " "
          << io::fmt_double(j.axis.z()) << "\n";
      out << "limits " << io::fmt_double(j.limit_lo) << " " << io::fmt_double(j.limit_hi) << "\n";
    }
  }
  out << "fingertips";
  for (int tip : chain.fingertip_links()) out << " " << chain.links()[tip];
  out << "\n";
  return out.str();
}

cloud::OrientedPointCloud sphere_cloud(int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("fixtures: sphere cloud needs at least one point");
  Rng rng(seed);
  cloud::OrientedPointCloud c;
  c.points.reserve(count);
  c.normals.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
    while (dir.norm() < 1e-9) dir = {rng.normal(), rng.normal(), rng.normal()};
    dir.normalize();
    c.points.push_back(dir);
    c.normals.push_back(dir);
  }
  return c;
}

hand::HandConfiguration gripper3_pose_at_radius(double radius) {
  const double l1 = kGripperL1, l2 = kGripperL2;
  const double c2 = (radius * radius - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c2 < -1.0 || c2 > 1.0) throw ConfigError("fixtures: radius outside gripper3 reach");
  const double q2 = std::acos(c2);
  const double q1 = std::atan2(-l2 * std::sin(q2), l1 + l2 * std::cos(q2));
  hand::HandConfiguration q(6);
  q << q1, q2, q1, q2, q1, q2;
  return q;
}

hand::HandConfiguration sphere_grasp_qgen() { return gripper3_pose_at_radius(1.005); }

std::vector<std::vector<Eigen::VectorXd>> sinusoid_dataset(int sequences, int frames, int dof,
                                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<Eigen::VectorXd>> out;
  out.reserve(sequences);
  for (int s = 0; s < sequences; ++s) {
    std::vector<double> amp(dof), omega(dof), phase(dof);
    for (int d = 0; d < dof; ++d) {
      amp[d] = rng.uniform(0.3, 1.0);
      omega[d] = rng.uniform(0.5, 2.0);
      phase[d] = rng.uniform(0.0, 2.0 * kPi);
    }
    std::vector<Eigen::VectorXd> seq;
    seq.reserve(frames);
    for (int t = 0; t < frames; ++t) {
      Eigen::VectorXd q(dof);
      for (int d = 0; d < dof; ++d) q[d] = amp[d] * std::sin(omega[d] * 0.1 * t + phase[d]);
      seq.push_back(std::move(q));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Eigen::MatrixXd mixing_matrix(int dof, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dof, dof);
  for (int r = 0; r < dof; ++r)
    for (int c = 0; c < dof; ++c) a(r, c) += 0.25 * rng.uniform(-1.0, 1.0);
  return a;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("fixtures: cannot re-read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("fixtures: cannot write '" + path + "'");
  out << text;
}

}  // namespace

void generate_all(const std::string& out_dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  for (const char* sub : {"hands", "clouds", "grasp", "retarget", "vq"})
    fs::create_directories(root / sub);

  std::vector<std::pair<std::string, std::string>> written;  // (relpath, note)
  auto emit = [&](const std::string& rel, const std::string& text, const std::string& note) {
    write_file((root / rel).string(), text);
    written.emplace_back(rel, note);
  };

  emit("hands/one_dof.hand", chain_to_text(one_dof_chain()), "1-dof revolute demo");
  emit("hands/planar_two_link.hand", chain_to_text(planar_two_link_chain()),
       "planar 2-link arm");
  emit("hands/gripper3.hand", chain_to_text(gripper3_chain()), "3-finger gripper, 6 dof");
  emit("hands/hand20.hand", chain_to_text(hand20_chain()), "5-finger hand, 20 dof");

  {
    const auto sphere = sphere_cloud(2000, seed ^ 0x5bd1e995);
    io::save_cloud_ply((root / "clouds/unit_sphere.ply").string(), sphere);
    written.emplace_back("clouds/unit_sphere.ply", "2000 surface samples, radial normals");
  }

  {
    hand::HandTrajectory gen;
    const hand::HandConfiguration q = sphere_grasp_qgen();
    for (int t = 0; t < 5; ++t) gen.frames.push_back(q);
    io::save_hand_trajectory((root / "grasp/sphere_gen.qtraj").string(), gen, 30.0);
    written.emplace_back("grasp/sphere_gen.qtraj", "fingertips 5 mm outside the unit sphere");

    geom::TargetPoseTrajectory target;
    target.frame_rate = 30.0;
    for (int t = 0; t < 5; ++t) target.frames.push_back(geom::RigidTransform::identity());
    io::save_pose_trajectory((root / "grasp/sphere_target.postraj").string(), target);
    written.emplace_back("grasp/sphere_target.postraj", "identity object poses");
  }

  {
    // Keypoint arc traced by gripper3 fingertips over a smooth joint sweep.
    const auto chain = gripper3_chain();
    io::KeypointFile kf;
    kf.names = {"tip0", "tip1", "tip2"};
    const int frames = 25;
    hand::HandTrajectory truth;
    for (int t = 0; t < frames; ++t) {
      const double radius = 1.02 + 0.05 * std::sin(2.0 * kPi * t / frames);
      const hand::HandConfiguration q = gripper3_pose_at_radius(radius);
      truth.frames.push_back(q);
      retarget::KeypointFrame frame;
      frame.positions = hand::fingertip_positions(chain, q);
      kf.frames.push_back(std::move(frame));
    }
    io::save_keypoints((root / "retarget/arc.kpts").string(), kf);
    written.emplace_back("retarget/arc.kpts", "fingertip targets from a known joint sweep");
    io::save_hand_trajectory((root / "retarget/arc_truth.qtraj").string(), truth, 30.0);
    written.emplace_back("retarget/arc_truth.qtraj", "joint sweep that generated arc.kpts");

    // Rest pose near the start of the arc. The fully-extended zero pose is a
    // kinematic singularity of this gripper, so the solver needs a bent seed.
    hand::HandTrajectory rest;
    hand::HandConfiguration q0 = truth.frames.front();
    for (int d = 0; d < q0.size(); ++d) q0[d] += (d % 2 == 0 ? 0.05 : -0.05);
    rest.frames.push_back(q0);
    io::save_hand_trajectory((root / "retarget/arc_init.qtraj").string(), rest, 0.0);
    written.emplace_back("retarget/arc_init.qtraj", "rest pose seeding the arc solve");

    std::ostringstream spec;
    spec << "retarget\n";
    spec << "lambda_smooth 0\n";
    spec << "map f0_tip 0 weight 1 scale 1\n";
    spec << "map f1_tip 1 weight 1 scale 1\n";
    spec << "map f2_tip 2 weight 1 scale 1\n";
    emit("retarget/arc.rspec", spec.str(), "tip correspondences for arc.kpts");
  }

  {
    const auto data = sinusoid_dataset(8, 20, 4, seed ^ 0x9e3779b9);
    io::save_pose_dataset((root / "vq/sinusoid.pset").string(), data, 4);
    written.emplace_back("vq/sinusoid.pset", "8 sinusoidal pose sequences, dof 4");

    const auto ref = sinusoid_dataset(8, 20, 4, seed ^ 0x7f4a7c15);
    const Eigen::MatrixXd mix = mixing_matrix(4, seed ^ 0x94d049bb);
    std::vector<std::vector<Eigen::VectorXd>> mixed(ref.size());
    for (std::size_t s = 0; s < ref.size(); ++s)
      for (const Eigen::VectorXd& q : ref[s]) mixed[s].push_back(mix * q);
    io::save_pose_dataset((root / "vq/pair_ref.pset").string(), ref, 4);
    io::save_pose_dataset((root / "vq/pair_new.pset").string(), mixed, 4);
    written.emplace_back("vq/pair_ref.pset", "reference arm of the paired-morphology fixture");
    written.emplace_back("vq/pair_new.pset", "per-frame linear image of pair_ref.pset");
  }

  nlohmann::json manifest;
  manifest["seed"] = seed;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [rel, note] : written) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file((root / rel).string()))));
    files.push_back({{"file", rel}, {"fnv1a64", hex}, {"note", note}});
  }
  manifest["files"] = files;
  manifest["expectations"] = nlohmann::json::array(
      {nlohmann::json{{"fixture", "grasp/sphere_gen.qtraj"},
                      {"check", "refined max |signed distance| < 1e-3 m"},
                      {"origin", "measured on the bundled scenario"}},
       nlohmann::json{{"fixture", "retarget/arc.kpts"},
                      {"check", "recovered joints within 1e-3 rad of arc_truth.qtraj"},
                      {"origin", "targets constructed from known joints"}},
       nlohmann::json{{"fixture", "vq/sinusoid.pset"},
                      {"check", "200-epoch reconstruction MSE <= 0.1x initial"},
                      {"origin", "measured training run"}},
       nlohmann::json{{"fixture", "clouds/unit_sphere.ply"},
                      {"check", "all radii within 1e-9 of 1; normals radial"},
                      {"origin", "construction"}}});
  write_file((root / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace dextok::fixtures
