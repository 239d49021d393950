#include <doctest.h>

#include <cmath>

#include "dkflab/matrixtools.hpp"
#include "dkflab/model.hpp"

using namespace dkflab;

namespace {

Eigen::MatrixXd twin_oscillator_f() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
  f << 0.4, 0.9, 0, 0, -0.9, 0.4, 0, 0, 0, 0, 0.5, 0.8, 0, 0, -0.8, 0.5;
  return f;
}

PlantModel tiny_model(double q_scale = 0.05, double r_scale = 0.5) {
  Eigen::MatrixXd h(2, 4);
  h << 1, 0, 0, 0, 0, 0, 1, 0;
  std::vector<Sensor> sensors{{h, r_scale * Eigen::MatrixXd::Identity(2, 2)}};
  return PlantModel(twin_oscillator_f(), q_scale * Eigen::MatrixXd::Identity(4, 4), sensors);
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("construction validates inputs") {
  // (F, H) with only the first oscillator observed is not observable
  Eigen::MatrixXd h(1, 4);
  h << 1, 0, 0, 0;
  std::vector<Sensor> sensors{{h, Eigen::MatrixXd::Identity(1, 1)}};
  CHECK_THROWS_AS(PlantModel(twin_oscillator_f(), Eigen::MatrixXd::Identity(4, 4), sensors), Error);

  // a single full-state sensor is trivially observable
  Eigen::MatrixXd h_full = Eigen::MatrixXd::Identity(4, 4);
  std::vector<Sensor> good{{h_full, Eigen::MatrixXd::Identity(4, 4)}};
  CHECK_NOTHROW(PlantModel(twin_oscillator_f(), Eigen::MatrixXd::Identity(4, 4), good));

  // indefinite Q
  Eigen::MatrixXd bad_q = Eigen::Vector4d(1, 1, 1, -1).asDiagonal();
  CHECK_THROWS_AS(PlantModel(twin_oscillator_f(), bad_q, good), Error);
}

TEST_CASE("sample_initial determinism and moments") {
  const Eigen::VectorXd mean = Eigen::Vector4d(1, 2, 3, 4);

  Rng a = Rng::stream(5, "t");
  Rng b = Rng::stream(5, "t");
  const Eigen::MatrixXd p0 = Eigen::MatrixXd::Identity(4, 4);
  CHECK(sample_initial(mean, p0, a) == sample_initial(mean, p0, b));

  Rng c = Rng::stream(6, "t");
  const Eigen::VectorXd nearly = sample_initial(mean, 1e-12 * p0, c);
  CHECK((nearly - mean).cwiseAbs().maxCoeff() < 1e-5);

  // empirical covariance of 1e5 standard draws
  Rng d = Rng::stream(7, "t");
  const int draws = 100000;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd x = sample_initial(Eigen::VectorXd::Zero(4), p0, d);
    acc += x;
    cov += x * x.transpose();
  }
  acc /= draws;
  cov = cov / draws - acc * acc.transpose();
  CHECK((cov - p0).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("step_truth") {
  const PlantModel quiet = tiny_model(1e-30);
  Rng rng = Rng::stream(1, "w");
  const Eigen::VectorXd x = Eigen::Vector4d(1, 0, 1, 0);
  const Eigen::VectorXd next = step_truth(x, quiet, rng);
  const Eigen::VectorXd expected = Eigen::Vector4d(0.4, -0.9, 0.5, -0.8);
  CHECK((next - expected).cwiseAbs().maxCoeff() < 1e-10);

  // F = I: empirical covariance of the increment approximates Q
  Eigen::MatrixXd h_full = Eigen::MatrixXd::Identity(2, 2);
  std::vector<Sensor> sensors{{h_full, Eigen::MatrixXd::Identity(2, 2)}};
  Eigen::MatrixXd q(2, 2);
  q << 1.0, 0.3, 0.3, 0.5;
  const PlantModel walk(Eigen::MatrixXd::Identity(2, 2), q, sensors);
  Rng rng2 = Rng::stream(2, "w");
  const int draws = 100000;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd w = step_truth(Eigen::VectorXd::Zero(2), walk, rng2);
    cov += w * w.transpose();
  }
  cov /= draws;
  // five standard errors per entry of a Gaussian covariance estimate
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double se = std::sqrt((q(r, r) * q(c, c) + q(r, c) * q(r, c)) / draws);
      CHECK(std::abs(cov(r, c) - q(r, c)) < 5 * se);
    }
}

TEST_CASE("measure") {
  const PlantModel nearly_exact = tiny_model(0.05, 1e-26);
  std::vector<Rng> streams{Rng::stream(3, "s", 0, 0)};
  const Eigen::VectorXd x = Eigen::Vector4d(1, -1, 2, 0.5);
  const auto ys = measure(x, nearly_exact, streams);
  REQUIRE(ys.size() == 1);
  CHECK((ys[0] - nearly_exact.sensor(0).h * x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("measurement noises of distinct sensors are uncorrelated") {
  Eigen::MatrixXd h1(1, 2);
  h1 << 0, 0;  // zero row: the measurement is pure noise
  std::vector<Sensor> sensors{{h1, Eigen::MatrixXd::Identity(1, 1)},
                              {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)}};
  const PlantModel model(0.5 * Eigen::MatrixXd::Identity(2, 2),
                         Eigen::MatrixXd::Identity(2, 2), sensors);

  std::vector<Rng> streams{Rng::stream(11, "s", 0, 0), Rng::stream(11, "s", 0, 1)};
  const int draws = 100000;
  double mean1 = 0.0, var1 = 0.0, cross = 0.0;
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < draws; ++i) {
    const auto ys = measure(origin, model, streams);
    mean1 += ys[0][0];
    var1 += ys[0][0] * ys[0][0];
    cross += ys[0][0] * ys[1][0];
  }
  mean1 /= draws;
  var1 = var1 / draws - mean1 * mean1;
  cross /= draws;
  CHECK(std::abs(mean1) < 0.02);
  CHECK(std::abs(var1 - 1.0) < 0.02);
  CHECK(std::abs(cross) < 0.02);
}

TEST_CASE("random_sensor_suite observability and determinism") {
  const auto suite = random_sensor_suite(twin_oscillator_f(), 100, 1, 3);
  REQUIRE(suite.size() == 100);
  Eigen::MatrixXd stacked(100, 4);
  for (int i = 0; i < 100; ++i) {
    stacked.row(i) = suite[static_cast<std::size_t>(i)];
    for (int c = 0; c < 4; ++c) {
      const double v = suite[static_cast<std::size_t>(i)](0, c);
      CHECK((v == -1.0 || v == 0.0 || v == 1.0));
    }
  }
  // independent rank oracle on the stacked observability matrix
  Eigen::MatrixXd obs(400, 4);
  Eigen::MatrixXd block = stacked;
  for (int p = 0; p < 4; ++p) {
    obs.middleRows(p * 100, 100) = block;
    block = block * twin_oscillator_f();
  }
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(obs).rank() == 4);

  const auto again = random_sensor_suite(twin_oscillator_f(), 100, 1, 3);
  for (int i = 0; i < 100; ++i) {
    CHECK(suite[static_cast<std::size_t>(i)] == again[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("trajectories are bit-reproducible") {
  const PlantModel model = tiny_model();
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  const Eigen::MatrixXd p0 = Eigen::MatrixXd::Identity(4, 4);
  const TruthTrajectory a = simulate_trajectory(model, mean, p0, 50, 123, 4);
  const TruthTrajectory b = simulate_trajectory(model, mean, p0, 50, 123, 4);
  REQUIRE(a.states.size() == 51);
  REQUIRE(a.measurements.size() == 50);
  for (std::size_t k = 0; k < a.states.size(); ++k) CHECK(a.states[k] == b.states[k]);
  for (std::size_t k = 0; k < a.measurements.size(); ++k) {
    CHECK(a.measurements[k][0] == b.measurements[k][0]);
  }

  const TruthTrajectory other = simulate_trajectory(model, mean, p0, 50, 123, 5);
  CHECK(a.states[1] != other.states[1]);
}

TEST_SUITE_END();
