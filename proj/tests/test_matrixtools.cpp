#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "dkflab/matrixtools.hpp"
#include "dkflab/rng.hpp"

using namespace dkflab;

namespace {

Eigen::MatrixXd random_symmetric(int n, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = scale * rng.normal();
  return symmetrize(a);
}

Eigen::MatrixXd random_psd(int n, Rng& rng) {
  Eigen::MatrixXd b(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) b(r, c) = rng.normal();
  return symmetrize(b * b.transpose());
}

}  // namespace

TEST_SUITE_BEGIN("matrixtools");

TEST_CASE("vech ordering") {
  CHECK(vech(Eigen::MatrixXd::Identity(2, 2)) == Eigen::Vector3d(1, 0, 1));

  Eigen::MatrixXd m(2, 2);
  m << 3.0, -1.5, -1.5, 7.0;
  CHECK(vech(m) == Eigen::Vector3d(3.0, -1.5, 7.0));
}

namespace {

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a dkflab::Error");
}

}  // namespace

TEST_CASE("vech rejects asymmetric input") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  CHECK(code_of([&] { vech(m); }) == Errc::NotSymmetric);
}

TEST_CASE("invvech basics and errors") {
  CHECK(invvech(Eigen::Vector3d(1, 0, 1)) == Eigen::MatrixXd::Identity(2, 2));
  CHECK(invvech(Eigen::Vector3d(0, 0, 0)) == Eigen::MatrixXd::Zero(2, 2));
  CHECK(code_of([] { invvech(Eigen::VectorXd::Zero(4)); }) == Errc::BadLength);
}

TEST_CASE("vech/invvech round trip, dimensions 1-8") {
  Rng rng(101);
  for (int n = 1; n <= 8; ++n) {
    for (int rep = 0; rep < 25; ++rep) {
      const Eigen::MatrixXd m = random_symmetric(n, rng);
      CHECK((invvech(vech(m)) - m).cwiseAbs().maxCoeff() == 0.0);
      Eigen::VectorXd v = rng.normal_vector(vech_size(n));
      CHECK((vech(invvech(v)) - v).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("psd_project diagonal cases") {
  Eigen::MatrixXd d = Eigen::Vector2d(1, 2).asDiagonal();
  CHECK((psd_project(d) - d).norm() < 1e-14);

  Eigen::MatrixXd ind = Eigen::Vector2d(1, -1).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector2d(1, 0).asDiagonal();
  CHECK((psd_project(ind) - expected).norm() < 1e-14);
}

TEST_CASE("psd_project is the Frobenius-nearest PSD matrix (sampled)") {
  Rng rng(7);
  const Eigen::MatrixXd m = random_symmetric(4, rng, 2.0);
  const Eigen::MatrixXd out = psd_project(m);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12 * spectral_norm(m));
  CHECK((psd_project(out) - out).norm() < 1e-12);  // idempotent

  const double best = (out - m).norm();
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::MatrixXd x = random_psd(4, rng);
    CHECK(best <= (x - m).norm() + 1e-12);
  }
}

TEST_CASE("solve_dare scalar closed form") {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Constant(1, 1, 0.5);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const DareSolution sol = solve_dare(f, one, one, one);
  // fixed point of the scalar recursion solves p^2 - 0.25 p - 1 = 0
  const double expected = (0.25 + std::sqrt(0.25 * 0.25 + 4.0)) / 2.0;
  CHECK(sol.p_star(0, 0) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(sol.residual < 1e-12);
}

TEST_CASE("solve_dare memoryless plant: F = 0 gives P* = Q") {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd q = 3.0 * Eigen::MatrixXd::Identity(2, 2);
  const DareSolution sol = solve_dare(f, h, q, Eigen::MatrixXd::Identity(2, 2));
  CHECK((sol.p_star - q).norm() < 1e-12);
}

TEST_CASE("solve_dare preconditions") {
  const Eigen::MatrixXd f = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd h(1, 2);
  h << 1, 0;  // (F, H) unobservable for diagonal F
  CHECK(code_of([&] {
          solve_dare(f, h, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1));
        }) == Errc::NotObservable);

  CHECK(code_of([] {
          solve_dare(Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Identity(1, 1),
                     Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1), 1e-13, 1);
        }) == Errc::NoConvergence);
}

TEST_CASE("solve_dare uniqueness and inversion-lemma identity") {
  Rng rng(31);
  const int n = 3;
  Eigen::MatrixXd f(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) f(r, c) = 0.4 * rng.normal();
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r_bar = 0.5 * Eigen::MatrixXd::Identity(n, n);

  const DareSolution a = solve_dare(f, h, q, r_bar);
  const Eigen::MatrixXd p0 = 10.0 * Eigen::MatrixXd::Identity(n, n);
  const DareSolution b = solve_dare(f, h, q, r_bar, 1e-13, 200000, &p0);
  CHECK((a.p_star - b.p_star).norm() < 1e-8);

  const Eigen::MatrixXd info = h.transpose() * spd_inverse(r_bar) * h;
  const Eigen::MatrixXd rhs =
      f * spd_inverse(spd_inverse(a.p_star) + info) * f.transpose() + q;
  CHECK((a.p_star - rhs).norm() / a.p_star.norm() < 1e-9);
}

TEST_CASE("schur_radius") {
  CHECK(schur_radius(0.5 * Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(0.5));

  Eigen::MatrixXd nilpotent(2, 2);
  nilpotent << 0, 1, 0, 0;
  CHECK(schur_radius(nilpotent) < 1e-12);

  // companion matrix of z^2 - 0.5 z - 0.3; oracle from the quadratic formula
  Eigen::MatrixXd companion(2, 2);
  companion << 0.5, 0.3, 1.0, 0.0;
  const double root = (0.5 + std::sqrt(0.25 + 1.2)) / 2.0;
  CHECK(schur_radius(companion) == doctest::Approx(root).epsilon(1e-12));
}

TEST_CASE("spd_inverse guard") {
  Eigen::MatrixXd ind = Eigen::Vector2d(1, -1).asDiagonal();
  CHECK(code_of([&] { spd_inverse(ind); }) == Errc::NotPositiveDefinite);
  CHECK(!is_positive_definite(ind));
  CHECK(is_positive_definite(Eigen::MatrixXd::Identity(3, 3)));

  Rng rng(5);
  const Eigen::MatrixXd p = random_psd(4, rng) + Eigen::MatrixXd::Identity(4, 4);
  CHECK((spd_inverse(p) * p - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);
}

TEST_SUITE_END();
