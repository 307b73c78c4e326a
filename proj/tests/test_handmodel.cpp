#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "dextok/common.hpp"
#include "dextok/fixtures.hpp"
#include "dextok/handmodel.hpp"

using namespace dextok;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent FK oracle: walks the tree with raw 4x4 homogeneous matrices.
Eigen::Matrix4d axis_angle_h(const Eigen::Vector3d& axis, double angle) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  return m;
}

Eigen::Matrix4d translation_h(const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topRightCorner<3, 1>() = t;
  return m;
}

std::vector<Eigen::Matrix4d> oracle_fk(const hand::KinematicChain& chain,
                                       const hand::HandConfiguration& q) {
  std::vector<Eigen::Matrix4d> world(chain.link_count(), Eigen::Matrix4d::Identity());
  for (int ji : chain.traversal_order()) {
    const hand::Joint& j = chain.joints()[ji];
    Eigen::Matrix4d motion = Eigen::Matrix4d::Identity();
    if (j.type == hand::JointType::revolute) motion = axis_angle_h(j.axis, q[j.q_index]);
    if (j.type == hand::JointType::prismatic) motion = translation_h(j.axis * q[j.q_index]);
    world[j.child_link] = world[j.parent_link] * j.origin.matrix() * motion;
  }
  return world;
}

hand::KinematicChain parse(const std::string& text) {
  std::istringstream in(text);
  return hand::parse_chain(in, "<test>");
}

hand::HandConfiguration random_q(const hand::KinematicChain& chain, Rng& rng) {
  hand::HandConfiguration q(chain.dof());
  for (int d = 0; d < chain.dof(); ++d) q[d] = rng.uniform(-1.2, 1.2);
  return q;
}

}  // namespace

TEST_SUITE_BEGIN("handmodel");

TEST_CASE("single revolute joint FK") {
  const auto chain = fixtures::one_dof_chain();
  CHECK(chain.dof() == 1);
  CHECK(chain.fingertip_count() == 1);

  hand::HandConfiguration q(1);
  q << 0.0;
  auto tips = hand::fingertip_positions(chain, q);
  CHECK((tips[0] - Eigen::Vector3d(0.3, 0, 0)).norm() < 1e-15);

  q << kPi / 2;
  tips = hand::fingertip_positions(chain, q);
  CHECK((tips[0] - Eigen::Vector3d(0, 0.3, 0)).norm() < 1e-12);
}

TEST_CASE("planar two-link FK matches the hand-computed pose") {
  const double l1 = 0.4, l2 = 0.3;
  const auto chain = fixtures::planar_two_link_chain(l1, l2);
  hand::HandConfiguration q(2);
  q << kPi / 2, kPi / 2;
  const auto tips = hand::fingertip_positions(chain, q);
  CHECK((tips[0] - Eigen::Vector3d(-l2, l1, 0)).norm() < 1e-12);
}

TEST_CASE("FK of fixed-only chains equals composed origins") {
  const std::string text = R"(hand fixed_demo
link base
link a
link b
joint ja fixed base a
origin 1 0 0 0.1  0 1 0 0  0 0 1 0.2  0 0 0 1
joint jb fixed a b
origin 1 0 0 0  0 1 0 0.5  0 0 1 0  0 0 0 1
fingertips b
)";
  const auto chain = parse(text);
  CHECK(chain.dof() == 0);
  const auto world = hand::forward_kinematics(chain, hand::HandConfiguration(0));
  CHECK((world[chain.link_index("b")].translation() - Eigen::Vector3d(0.1, 0.5, 0.2)).norm() <
        1e-15);
}

TEST_CASE("model file errors") {
  SUBCASE("cycle") {
    const std::string text = R"(hand bad
link a
link b
joint j1 fixed a b
joint j2 fixed b a
fingertips b
)";
    CHECK_THROWS_AS(parse(text), DataError);
  }
  SUBCASE("non-unit axis") {
    const std::string text = R"(hand bad
link a
link b
joint j1 revolute a b
axis 0 0 2
limits -1 1
fingertips b
)";
    CHECK_THROWS_AS(parse(text), DataError);
  }
  SUBCASE("unknown fingertip") {
    const std::string text = R"(hand bad
link a
link b
joint j1 fixed a b
fingertips nope
)";
    CHECK_THROWS_AS(parse(text), DataError);
  }
  SUBCASE("missing limits") {
    const std::string text = R"(hand bad
link a
link b
joint j1 revolute a b
axis 0 0 1
fingertips b
)";
    CHECK_THROWS_AS(parse(text), DataError);
  }
  SUBCASE("two roots") {
    const std::string text = R"(hand bad
link a
link b
link c
joint j1 fixed a b
fingertips b
)";
    CHECK_THROWS_AS(parse(text), DataError);
  }
}

TEST_CASE("demo hand20 loads with 20 dof and 5 fingertips") {
  const auto chain = fixtures::hand20_chain();
  CHECK(chain.dof() == 20);
  CHECK(chain.fingertip_count() == 5);

  // round-trip through the text format
  const auto reparsed = parse(fixtures::chain_to_text(chain));
  CHECK(reparsed.dof() == 20);
  Rng rng(17);
  const auto q = random_q(chain, rng);
  const auto tips_a = hand::fingertip_positions(chain, q);
  const auto tips_b = hand::fingertip_positions(reparsed, q);
  for (int i = 0; i < 5; ++i) CHECK((tips_a[i] - tips_b[i]).norm() < 1e-12);
}

TEST_CASE("FK matches the independent recursive oracle") {
  Rng rng(99);
  for (const auto& chain : {fixtures::gripper3_chain(), fixtures::hand20_chain()}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto q = random_q(chain, rng);
      const auto world = hand::forward_kinematics(chain, q);
      const auto expect = oracle_fk(chain, q);
      for (int l = 0; l < chain.link_count(); ++l)
        CHECK((world[l].matrix() - expect[l]).norm() < 1e-10);
    }
  }
}

TEST_CASE("fingertip positions agree with FK map lookups") {
  const auto chain = fixtures::hand20_chain();
  const hand::HandConfiguration q = hand::HandConfiguration::Zero(20);
  const auto world = hand::forward_kinematics(chain, q);
  const auto tips = hand::fingertip_positions(chain, q);
  for (int i = 0; i < chain.fingertip_count(); ++i)
    CHECK((tips[i] - world[chain.fingertip_links()[i]].translation()).norm() == doctest::Approx(0));
}

TEST_CASE("Jacobian columns for canonical joints") {
  SUBCASE("revolute about z with tip at (L,0,0)") {
    const auto chain = fixtures::one_dof_chain();
    hand::HandConfiguration q(1);
    q << 0.0;
    const Eigen::MatrixXd jac = hand::fingertip_jacobian(chain, q, 0);
    CHECK((jac.col(0) - Eigen::Vector3d(0, 0.3, 0)).norm() < 1e-14);
  }
  SUBCASE("prismatic along x") {
    const std::string text = R"(hand slider
link base
link rod
joint j1 prismatic base rod
axis 1 0 0
limits 0 1
fingertips rod
)";
    const auto chain = parse(text);
    hand::HandConfiguration q(1);
    q << 0.25;
    const Eigen::MatrixXd jac = hand::fingertip_jacobian(chain, q, 0);
    CHECK((jac.col(0) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
  }
}

TEST_CASE("Jacobian matches central finite differences on 100 random configurations") {
  Rng rng(12345);
  const double h = 1e-6;
  int tested = 0;
  for (const auto& chain : {fixtures::gripper3_chain(), fixtures::hand20_chain()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto q = random_q(chain, rng);
      for (int f = 0; f < chain.fingertip_count(); ++f) {
        const Eigen::MatrixXd jac = hand::fingertip_jacobian(chain, q, f);
        Eigen::MatrixXd fd(3, chain.dof());
        for (int d = 0; d < chain.dof(); ++d) {
          hand::HandConfiguration qp = q, qm = q;
          qp[d] += h;
          qm[d] -= h;
          fd.col(d) =
              (hand::fingertip_positions(chain, qp)[f] - hand::fingertip_positions(chain, qm)[f]) /
              (2 * h);
        }
        const double scale = std::max(1.0, jac.norm());
        CHECK((jac - fd).norm() / scale < 1e-5);
      }
      ++tested;
    }
  }
  CHECK(tested == 100);
}

TEST_CASE("clamp_to_limits") {
  const auto chain = fixtures::hand20_chain();
  hand::HandConfiguration q = hand::HandConfiguration::Constant(20, 0.5);
  CHECK((hand::clamp_to_limits(chain, q) - q).norm() == doctest::Approx(0));

  q[3] = 99.0;
  const auto clamped = hand::clamp_to_limits(chain, q);
  CHECK(clamped[3] == doctest::Approx(1.6));
  CHECK((hand::clamp_to_limits(chain, clamped) - clamped).norm() == doctest::Approx(0));
}

TEST_CASE("dof mismatch raises") {
  const auto chain = fixtures::one_dof_chain();
  CHECK_THROWS_AS(hand::forward_kinematics(chain, hand::HandConfiguration(3)), DataError);
  CHECK_THROWS_AS(hand::fingertip_jacobian(chain, hand::HandConfiguration::Zero(1), 5), DataError);
}

TEST_CASE("fingertip motion is Lipschitz in q on the demo hand") {
  const auto chain = fixtures::hand20_chain();
  double lip = 0.0;
  for (const hand::Joint& j : chain.joints()) lip += j.origin.translation().norm();
  lip += 0.1;  // fingertip offsets beyond the last joint origins
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = random_q(chain, rng);
    hand::HandConfiguration dq(20);
    for (int d = 0; d < 20; ++d) dq[d] = 1e-3 * rng.uniform(-1, 1);
    const auto a = hand::fingertip_positions(chain, q);
    const auto b = hand::fingertip_positions(chain, q + dq);
    for (int f = 0; f < 5; ++f) CHECK((a[f] - b[f]).norm() <= lip * dq.norm() + 1e-12);
  }
}

TEST_SUITE_END();
