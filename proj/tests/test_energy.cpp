#include <doctest.h>

#include <cmath>

#include "dextok/common.hpp"
#include "dextok/energy.hpp"
#include "dextok/fixtures.hpp"

using namespace dextok;
using energy::ContactKernelParams;

namespace {

ContactKernelParams unit_params() {
  ContactKernelParams p;
  p.alpha = 1.0;
  p.k = 1.0;
  p.lambda_c = 1.0;
  p.epsilon = 1e-8;
  return p;
}

// Residual of one fingertip with frozen correspondences; the finite-difference
// oracle for the analytic Jacobian rows.
Eigen::VectorXd frozen_residuals(const Eigen::VectorXd& q, const hand::KinematicChain& chain,
                                 const std::vector<Eigen::Vector3d>& p,
                                 const std::vector<Eigen::Vector3d>& n,
                                 const geom::RigidTransform& t_tar,
                                 const ContactKernelParams& params) {
  const geom::RigidTransform inv = geom::inverse(t_tar);
  const auto tips = hand::fingertip_positions(chain, q);
  Eigen::VectorXd r(tips.size());
  for (std::size_t i = 0; i < tips.size(); ++i) {
    const double d = n[i].dot(geom::apply(inv, tips[i]) - p[i]);
    r[i] = std::sqrt(2.0 * params.lambda_c * energy::kernel(d, params));
  }
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("energy");

TEST_CASE("kernel point values") {
  const auto p = unit_params();
  CHECK(energy::kernel(0.0, p) == 0.0);
  CHECK(energy::kernel(1.0, p) == 0.5);
  CHECK(energy::kernel(-1.0, p) == doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-14));
  CHECK(energy::kernel_derivative(0.0, p) == 0.0);
  CHECK(energy::kernel_derivative(-1.0, p) ==
        doctest::Approx(1.0 - std::exp(1.0)).epsilon(1e-14));
  // slope continuity from the inside branch
  CHECK(std::abs(energy::kernel_derivative(-1e-12, p)) < 1e-11);
}

TEST_CASE("kernel derivative matches central finite differences") {
  const auto p = unit_params();
  for (double d : {0.3, -0.3, 0.7, -0.9, 1.5}) {
    const double h = 1e-6;
    const double fd = (energy::kernel(d + h, p) - energy::kernel(d - h, p)) / (2 * h);
    CHECK(std::abs(fd - energy::kernel_derivative(d, p)) < 1e-8);
  }
}

TEST_CASE("kernel regularity near zero") {
  const auto p = unit_params();
  for (double h : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    CHECK(std::abs(energy::kernel(h, p) - energy::kernel(-h, p)) <= p.alpha * h * h);
    // the two-sided slope gap is 2h + h^2/2 + O(h^3); each one-sided slope
    // stays below 2h
    CHECK(std::abs(energy::kernel_derivative(h, p) - energy::kernel_derivative(-h, p)) <=
          2 * h + h * h);
    CHECK(std::abs(energy::kernel_derivative(h, p)) <= 2 * h);
    CHECK(std::abs(energy::kernel_derivative(-h, p)) <= 2 * h);
  }
  // one-sided second differences at 0
  const double h = 1e-5;
  const double out2 =
      (energy::kernel(2 * h, p) - 2 * energy::kernel(h, p) + energy::kernel(0, p)) / (h * h);
  const double in2 =
      (energy::kernel(-2 * h, p) - 2 * energy::kernel(-h, p) + energy::kernel(0, p)) / (h * h);
  CHECK(out2 == doctest::Approx(p.alpha).epsilon(1e-4));
  CHECK(in2 == doctest::Approx(p.alpha).epsilon(1e-4));
}

TEST_CASE("kernel convexity over [-1, 1]") {
  const auto p = unit_params();
  const double h = 1e-5;
  for (double d = -1.0; d <= 1.0; d += 0.01) {
    const double f2 =
        (energy::kernel(d + h, p) - 2 * energy::kernel(d, p) + energy::kernel(d - h, p)) / (h * h);
    CHECK(f2 >= -1e-6);
  }
  for (double d = -1.0; d <= 1.0; d += 0.01) CHECK(energy::kernel(d, p) >= 0.0);
}

TEST_CASE("smoothed_abs baseline kernel") {
  ContactKernelParams p = unit_params();
  p.kind = energy::KernelKind::smoothed_abs;
  p.delta = 1e-6;
  CHECK(energy::kernel(0.0, p) == doctest::Approx(0));
  CHECK(energy::kernel(0.5, p) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(energy::kernel(-0.5, p) == doctest::Approx(0.5).epsilon(1e-5));
  const double h = 1e-7;
  const double fd = (energy::kernel(0.3 + h, p) - energy::kernel(0.3 - h, p)) / (2 * h);
  CHECK(fd == doctest::Approx(energy::kernel_derivative(0.3, p)).epsilon(1e-6));
}

TEST_CASE("contact residual on a controllable prismatic probe") {
  // 1-dof prismatic chain along z over a single-point cloud at the origin.
  std::vector<std::string> links = {"base", "probe"};
  std::vector<hand::Joint> joints(1);
  joints[0].name = "slide";
  joints[0].type = hand::JointType::prismatic;
  joints[0].parent_link = 0;
  joints[0].child_link = 1;
  joints[0].axis = Eigen::Vector3d::UnitZ();
  joints[0].limit_lo = -10;
  joints[0].limit_hi = 10;
  const auto chain = hand::KinematicChain::build("probe", links, joints, {"probe"});

  cloud::OrientedPointCloud c;
  c.points.emplace_back(0, 0, 0);
  c.normals.push_back(Eigen::Vector3d::UnitZ());
  const auto index = cloud::build_index(c);
  const auto params = unit_params();

  hand::HandConfiguration q(1);

  SUBCASE("on the surface: zero residual and zero rows") {
    q << 0.0;
    const auto cr = energy::contact_residual(q, chain, index, geom::RigidTransform(), params);
    CHECK(cr.residuals[0] == 0.0);
    CHECK(cr.jacobian.norm() == 0.0);
    CHECK(cr.distances[0] == 0.0);
  }
  SUBCASE("outside by 0.1") {
    q << 0.1;
    const auto cr = energy::contact_residual(q, chain, index, geom::RigidTransform(), params);
    CHECK(cr.distances[0] == doctest::Approx(0.1));
    CHECK(cr.residuals[0] == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("inside by 0.1") {
    q << -0.1;
    const auto cr = energy::contact_residual(q, chain, index, geom::RigidTransform(), params);
    CHECK(cr.residuals[0] ==
          doctest::Approx(std::sqrt(2.0 * (std::exp(0.1) - 1.1))).epsilon(1e-12));
    CHECK(cr.residuals[0] == doctest::Approx(0.101695).epsilon(1e-4));
  }
}

TEST_CASE("contact energy equals both formulas") {
  energy::ContactResidual cr;
  cr.residuals = Eigen::Vector2d(0.1, 0.2);
  CHECK(energy::contact_energy(cr) == doctest::Approx(0.025).epsilon(1e-14));

  // random distances: 0.5 ||r||^2 vs lambda_c sum f(d)
  Rng rng(55);
  auto params = unit_params();
  params.lambda_c = 7.5;
  Eigen::VectorXd d(6), r(6);
  double direct = 0.0;
  for (int i = 0; i < 6; ++i) {
    d[i] = rng.uniform(-0.5, 0.5);
    r[i] = std::sqrt(2.0 * params.lambda_c * energy::kernel(d[i], params));
    direct += params.lambda_c * energy::kernel(d[i], params);
  }
  energy::ContactResidual cr2;
  cr2.residuals = r;
  CHECK(std::abs(energy::contact_energy(cr2) - direct) < 1e-12 * std::max(1.0, direct));
}

TEST_CASE("contact Jacobian rows match finite differences away from the kink") {
  Rng rng(808);
  const auto chain = fixtures::gripper3_chain();
  auto params = unit_params();
  params.lambda_c = 3.0;

  const auto sphere = fixtures::sphere_cloud(600, 4242);
  const auto index = cloud::build_index(sphere);

  int tested = 0;
  while (tested < 40) {
    hand::HandConfiguration q(6);
    for (int i = 0; i < 6; ++i) q[i] = rng.uniform(-1.0, 1.0);
    geom::RigidTransform t_tar = geom::RigidTransform::translate(
        {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)});

    const auto cr = energy::contact_residual(q, chain, index, t_tar, params);
    bool usable = true;
    for (int i = 0; i < cr.distances.size(); ++i)
      if (std::abs(cr.distances[i]) <= 0.05) usable = false;
    if (!usable) continue;
    ++tested;

    // freeze the correspondences the call used
    const geom::RigidTransform inv = geom::inverse(t_tar);
    const auto tips = hand::fingertip_positions(chain, q);
    std::vector<Eigen::Vector3d> p, n;
    for (const auto& tip : tips) {
      const auto hit = index.nearest(geom::apply(inv, tip));
      p.push_back(hit.point);
      n.push_back(hit.normal);
    }

    const double h = 1e-6;
    for (int d = 0; d < 6; ++d) {
      Eigen::VectorXd qp = q, qm = q;
      qp[d] += h;
      qm[d] -= h;
      const Eigen::VectorXd fd =
          (frozen_residuals(qp, chain, p, n, t_tar, params) -
           frozen_residuals(qm, chain, p, n, t_tar, params)) /
          (2 * h);
      for (int i = 0; i < 3; ++i) {
        const double scale = std::max(1e-3, std::abs(cr.jacobian(i, d)));
        CHECK(std::abs(cr.jacobian(i, d) - fd[i]) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("generative energy") {
  const Eigen::Vector3d q(1, 2, 3);
  const Eigen::Vector3d w = Eigen::Vector3d::Ones();
  CHECK(energy::generative_energy(q, q, w) == 0.0);
  CHECK(energy::generative_energy(Eigen::Vector3d(2, 2, 3), q, w) == doctest::Approx(0.5));

  Rng rng(66);
  Eigen::VectorXd a(5), b(5), wts(5);
  for (int i = 0; i < 5; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    wts[i] = rng.uniform(0, 2);
  }
  double expect = 0.0;
  for (int i = 0; i < 5; ++i) expect += 0.5 * wts[i] * (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(energy::generative_energy(a, b, wts) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(energy::generative_energy(a, b.head(3), wts), DataError);
}

TEST_CASE("temporal energy") {
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(4, 0.3);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
  CHECK(energy::temporal_energy(q, q, q, w, w) == 0.0);

  // uniform velocity with zero velocity weight: acceleration term vanishes
  Eigen::VectorXd q0(2), q1(2), q2(2);
  q0 << 0, 0;
  q1 << 1, 2;
  q2 << 2, 4;
  CHECK(energy::temporal_energy(q2, q1, q0, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)) ==
        doctest::Approx(0));

  Rng rng(91);
  Eigen::VectorXd a(3), b(3), c(3), wv(3), wa(3);
  for (int i = 0; i < 3; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    c[i] = rng.normal();
    wv[i] = rng.uniform(0, 2);
    wa[i] = rng.uniform(0, 2);
  }
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double vel = a[i] - b[i];
    const double acc = vel - (b[i] - c[i]);
    expect += 0.5 * wv[i] * vel * vel + 0.5 * wa[i] * acc * acc;
  }
  CHECK(energy::temporal_energy(a, b, c, wv, wa) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("prior gradient matches finite differences of the two prior energies") {
  Rng rng(314);
  const int dof = 7;
  Eigen::VectorXd q(dof), qg(dof), q1(dof), q2(dof);
  energy::PriorWeights w = energy::PriorWeights::uniform(dof, 0, 0, 0);
  for (int i = 0; i < dof; ++i) {
    q[i] = rng.normal();
    qg[i] = rng.normal();
    q1[i] = rng.normal();
    q2[i] = rng.normal();
    w.w_gen[i] = rng.uniform(0, 2);
    w.w_vel[i] = rng.uniform(0, 2);
    w.w_acc[i] = rng.uniform(0, 2);
  }

  SUBCASE("all priors satisfied: zero vector") {
    CHECK(energy::prior_gradient(q, q, q, q, w).norm() == doctest::Approx(0));
  }
  SUBCASE("only generative") {
    energy::PriorWeights wg = energy::PriorWeights::uniform(dof, 0, 0, 0);
    wg.w_gen = w.w_gen;
    const Eigen::VectorXd g = energy::prior_gradient(q, qg, q1, q2, wg);
    CHECK((g - w.w_gen.cwiseProduct(q - qg)).norm() < 1e-14);
  }
  SUBCASE("finite differences") {
    auto total = [&](const Eigen::VectorXd& x) {
      return energy::generative_energy(x, qg, w.w_gen) +
             energy::temporal_energy(x, q1, q2, w.w_vel, w.w_acc);
    };
    const Eigen::VectorXd g = energy::prior_gradient(q, qg, q1, q2, w);
    const double h = 1e-6;
    for (int d = 0; d < dof; ++d) {
      Eigen::VectorXd qp = q, qm = q;
      qp[d] += h;
      qm[d] -= h;
      CHECK(std::abs(g[d] - (total(qp) - total(qm)) / (2 * h)) < 1e-7);
    }
  }
}

TEST_CASE("all three energies are nonnegative on random inputs") {
  Rng rng(500);
  const auto p = unit_params();
  for (int t = 0; t < 200; ++t) {
    CHECK(energy::kernel(rng.uniform(-3, 3), p) >= 0.0);
    Eigen::VectorXd q(4), qg(4), q1(4), q2(4), wg(4), wv(4), wa(4);
    for (int i = 0; i < 4; ++i) {
      q[i] = rng.normal();
      qg[i] = rng.normal();
      q1[i] = rng.normal();
      q2[i] = rng.normal();
      wg[i] = rng.uniform(0, 5);
      wv[i] = rng.uniform(0, 5);
      wa[i] = rng.uniform(0, 5);
    }
    CHECK(energy::generative_energy(q, qg, wg) >= 0.0);
    CHECK(energy::temporal_energy(q, q1, q2, wv, wa) >= 0.0);
  }
}

TEST_CASE("parameter validation") {
  ContactKernelParams p = unit_params();
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = unit_params();
  p.lambda_c = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_SUITE_END();
