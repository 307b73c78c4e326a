#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dextok/common.hpp"
#include "dextok/config.hpp"
#include "dextok/fixtures.hpp"
#include "dextok/io.hpp"

using namespace dextok;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dextok_io_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("config tree: values, overrides, unknown keys") {
  TempDir dir("cfg");
  write(dir.file("a.cfg"),
        "# comment\n"
        "seed = 42\n"
        "refine.lambda_c = 50\n"
        "include b.cfg\n"
        "vq.codes = 64\n");
  write(dir.file("b.cfg"), "refine.lambda_c = 75\nvq.latent = 8\n");

  cfg::ConfigTree tree = cfg::ConfigTree::load(dir.file("a.cfg"));
  CHECK(tree.get_u64("seed", 0) == 42);
  // the include line runs in place, later lines in a.cfg still win over earlier ones
  CHECK(tree.get_double("refine.lambda_c", 0) == doctest::Approx(75));
  CHECK(tree.get_int("vq.latent", 0) == 8);
  CHECK(tree.get_int("vq.codes", 0) == 64);

  // CLI-style override wins
  tree.set("refine.lambda_c", "99");
  CHECK(tree.get_double("refine.lambda_c", 0) == doctest::Approx(99));

  const cfg::RunConfig rc = cfg::RunConfig::from_tree(tree);
  CHECK(rc.refine.kernel.lambda_c == doctest::Approx(99));

  tree.set("no.such.key", "1");
  CHECK_THROWS_AS(cfg::RunConfig::from_tree(tree), ConfigError);
}

TEST_CASE("config tree: field-level parse errors") {
  cfg::ConfigTree tree;
  tree.set("refine.lambda_c", "not_a_number");
  CHECK_THROWS_AS(cfg::RunConfig::from_tree(tree), ConfigError);

  cfg::ConfigTree tree2;
  tree2.set("vq.shuffle", "maybe");
  CHECK_THROWS_AS(cfg::RunConfig::from_tree(tree2), ConfigError);

  cfg::ConfigTree tree3;
  tree3.set("noise.sigmas", "0.001,zebra");
  CHECK_THROWS_AS(cfg::RunConfig::from_tree(tree3), ConfigError);
}

TEST_CASE("config include cycle is caught") {
  TempDir dir("cycle");
  write(dir.file("a.cfg"), "include b.cfg\n");
  write(dir.file("b.cfg"), "include a.cfg\n");
  CHECK_THROWS_AS(cfg::ConfigTree::load(dir.file("a.cfg")), ConfigError);
}

TEST_CASE("pose trajectory round trip") {
  TempDir dir("pose");
  geom::TargetPoseTrajectory traj;
  traj.frame_rate = 30.0;
  Rng rng(4);
  for (int i = 0; i < 5; ++i) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    traj.frames.push_back(geom::RigidTransform(
        geom::RigidTransform::rotate_axis_angle(axis, rng.uniform(-1, 1)).rotation(),
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())));
  }
  io::save_pose_trajectory(dir.file("t.postraj"), traj);
  const auto loaded = io::load_pose_trajectory(dir.file("t.postraj"));
  CHECK(loaded.frame_rate == 30.0);
  REQUIRE(loaded.frames.size() == 5);
  for (int i = 0; i < 5; ++i)
    CHECK((loaded.frames[i].matrix() - traj.frames[i].matrix()).norm() < 1e-15);

  // resaving the loaded trajectory is byte-identical
  io::save_pose_trajectory(dir.file("t2.postraj"), loaded);
  CHECK(slurp(dir.file("t.postraj")) == slurp(dir.file("t2.postraj")));

  write(dir.file("bad.postraj"), "posetraj frames\n");
  CHECK_THROWS_AS(io::load_pose_trajectory(dir.file("bad.postraj")), DataError);
  CHECK_THROWS_AS(io::load_pose_trajectory(dir.file("missing.postraj")), DataError);
}

TEST_CASE("hand trajectory round trip") {
  TempDir dir("qtraj");
  hand::HandTrajectory traj;
  Rng rng(5);
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd q(6);
    for (int d = 0; d < 6; ++d) q[d] = rng.normal();
    traj.frames.push_back(q);
  }
  io::save_hand_trajectory(dir.file("t.qtraj"), traj, 25.0);
  double rate = 0.0;
  const auto loaded = io::load_hand_trajectory(dir.file("t.qtraj"), &rate);
  CHECK(rate == 25.0);
  REQUIRE(loaded.frames.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK((loaded.frames[i] - traj.frames[i]).norm() == 0.0);

  write(dir.file("bad.qtraj"), "qtraj frames 2 dof 3 rate 30\n1 2 3\n4 5\n");
  CHECK_THROWS_AS(io::load_hand_trajectory(dir.file("bad.qtraj")), DataError);
}

TEST_CASE("cloud formats") {
  TempDir dir("cloud");

  SUBCASE("ply with normals round trips") {
    const auto sphere = fixtures::sphere_cloud(50, 3);
    io::save_cloud_ply(dir.file("s.ply"), sphere);
    const auto loaded = io::load_cloud(dir.file("s.ply"));
    REQUIRE(loaded.size() == 50);
    REQUIRE(loaded.normals.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK((loaded.points[i] - sphere.points[i]).norm() == 0.0);
      CHECK((loaded.normals[i] - sphere.normals[i]).norm() == 0.0);
    }
  }

  SUBCASE("xyz without normals") {
    write(dir.file("c.xyz"), "0 0 0\n1 0 0\n0 1 0\n");
    const auto loaded = io::load_cloud(dir.file("c.xyz"));
    CHECK(loaded.size() == 3);
    CHECK(loaded.normals.empty());
  }

  SUBCASE("xyz with normals") {
    write(dir.file("c.xyz"), "0 0 0 0 0 1\n1 0 0 0 0 1\n");
    const auto loaded = io::load_cloud(dir.file("c.xyz"));
    CHECK(loaded.size() == 2);
    CHECK(loaded.normals.size() == 2);
  }

  SUBCASE("inconsistent column count fails") {
    write(dir.file("c.xyz"), "0 0 0\n1 0\n");
    CHECK_THROWS_AS(io::load_cloud(dir.file("c.xyz")), DataError);
  }

  SUBCASE("ply without xyz properties fails") {
    write(dir.file("c.ply"),
          "ply\nformat ascii 1.0\nelement vertex 1\nproperty double a\nend_header\n0\n");
    CHECK_THROWS_AS(io::load_cloud(dir.file("c.ply")), DataError);
  }
}

TEST_CASE("keypoints round trip with and without names") {
  TempDir dir("kpts");
  io::KeypointFile kf;
  kf.names = {"a", "b"};
  for (int f = 0; f < 3; ++f) {
    retarget::KeypointFrame frame;
    frame.positions = {{0.1 * f, 0, 0}, {0, 0.1 * f, 0}};
    kf.frames.push_back(frame);
  }
  io::save_keypoints(dir.file("k.kpts"), kf);
  const auto loaded = io::load_keypoints(dir.file("k.kpts"));
  CHECK(loaded.names == kf.names);
  REQUIRE(loaded.frames.size() == 3);
  CHECK((loaded.frames[2].positions[1] - Eigen::Vector3d(0, 0.2, 0)).norm() == 0.0);

  write(dir.file("noname.kpts"), "keypoints 2 frames 1\n0.5 0 0\n0 0.5 0\n");
  const auto bare = io::load_keypoints(dir.file("noname.kpts"));
  CHECK(bare.names.empty());
  CHECK(bare.frames[0].positions[0].x() == doctest::Approx(0.5));

  write(dir.file("short.kpts"), "keypoints 2 frames 2\n0 0 0\n");
  CHECK_THROWS_AS(io::load_keypoints(dir.file("short.kpts")), DataError);
}

TEST_CASE("retarget spec defaults by link kind") {
  TempDir dir("rspec");
  const auto chain = fixtures::gripper3_chain();
  write(dir.file("s.rspec"),
        "retarget\n"
        "lambda_smooth 0.25\n"
        "map f0_tip 0\n"           // fingertip: default weight 1
        "map f0_upper 1\n"         // intermediate link: default 0.5
        "map f1_tip 2 weight 2.5 scale 1.1\n");
  const auto spec = io::load_retarget_spec(dir.file("s.rspec"), &chain);
  CHECK(spec.lambda_smooth == doctest::Approx(0.25));
  REQUIRE(spec.correspondences.size() == 3);
  CHECK(spec.correspondences[0].weight == doctest::Approx(1.0));
  CHECK(spec.correspondences[1].weight == doctest::Approx(0.5));
  CHECK(spec.correspondences[2].weight == doctest::Approx(2.5));
  CHECK(spec.correspondences[2].scale == doctest::Approx(1.1));

  write(dir.file("bad.rspec"), "retarget\nmap f0_tip zero\n");
  CHECK_THROWS_AS(io::load_retarget_spec(dir.file("bad.rspec"), &chain), DataError);
  write(dir.file("empty.rspec"), "retarget\n");
  CHECK_THROWS_AS(io::load_retarget_spec(dir.file("empty.rspec"), &chain), DataError);
}

TEST_CASE("pose dataset round trip") {
  TempDir dir("pset");
  const auto data = fixtures::sinusoid_dataset(3, 10, 4, 77);
  io::save_pose_dataset(dir.file("d.pset"), data, 4);
  int dof = 0;
  const auto loaded = io::load_pose_dataset(dir.file("d.pset"), &dof);
  CHECK(dof == 4);
  REQUIRE(loaded.size() == 3);
  for (std::size_t s = 0; s < 3; ++s) {
    REQUIRE(loaded[s].size() == 10);
    for (std::size_t t = 0; t < 10; ++t) CHECK((loaded[s][t] - data[s][t]).norm() == 0.0);
  }
}

TEST_CASE("archive round trip is byte-stable") {
  TempDir dir("vqa");
  Rng rng(10);
  io::Archive a;
  a.chunk.window = 8;
  a.chunk.stride = 4;
  a.chunk.dof = 4;
  a.codebook = vq::Codebook::random(16, 6, rng, 0.5);
  vq::CoderNet enc = vq::CoderNet::create({32, 24, 6}, vq::Activation::tanh_fn);
  vq::CoderNet dec = vq::CoderNet::create({6, 24, 32}, vq::Activation::tanh_fn);
  enc.init_random(rng, 1.0);
  dec.init_random(rng, 1.0);
  a.nets.emplace_back("enc:ref", enc);
  a.nets.emplace_back("dec:ref", dec);

  io::save_archive(dir.file("a.vqa"), a);
  const io::Archive b = io::load_archive(dir.file("a.vqa"));
  CHECK(b.chunk.window == 8);
  CHECK(b.codebook.codes == a.codebook.codes);
  CHECK(b.has_net("enc:ref"));
  CHECK(b.net("dec:ref").layers[0].weights == dec.layers[0].weights);
  CHECK_THROWS_AS(b.net("enc:other"), DataError);

  io::save_archive(dir.file("b.vqa"), b);
  CHECK(slurp(dir.file("a.vqa")) == slurp(dir.file("b.vqa")));

  write(dir.file("bad.vqa"), "vqarchive 2\n");
  CHECK_THROWS_AS(io::load_archive(dir.file("bad.vqa")), DataError);
}

TEST_CASE("fixture generation is deterministic") {
  TempDir dir("fix");
  fixtures::generate_all(dir.file("one"), 7);
  fixtures::generate_all(dir.file("two"), 7);
  for (const char* rel :
       {"manifest.json", "hands/gripper3.hand", "clouds/unit_sphere.ply", "vq/sinusoid.pset"}) {
    CHECK(slurp((dir.path / "one" / rel).string()) == slurp((dir.path / "two" / rel).string()));
  }
  // sphere fixture invariants
  const auto sphere = io::load_cloud(dir.file("one/clouds/unit_sphere.ply"));
  for (std::size_t i = 0; i < sphere.size(); ++i) {
    CHECK(std::abs(sphere.points[i].norm() - 1.0) < 1e-9);
    CHECK((sphere.normals[i] - sphere.points[i].normalized()).norm() < 1e-9);
  }
}

TEST_SUITE_END();
