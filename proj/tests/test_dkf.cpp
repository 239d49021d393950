#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <sstream>

#include "dkflab/ckf.hpp"
#include "dkflab/dkf.hpp"
#include "dkflab/matrixtools.hpp"
#include "dkflab/oracle.hpp"

using namespace dkflab;

namespace {

Eigen::MatrixXd twin_oscillator_f() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
  f << 0.4, 0.9, 0, 0, -0.9, 0.4, 0, 0, 0, 0, 0.5, 0.8, 0, 0, -0.8, 0.5;
  return f;
}

PlantModel suite_model(std::uint64_t seed, int sensor_count, double r_scale,
                       double q_scale = 0.05) {
  std::vector<Sensor> sensors;
  for (auto& h : random_sensor_suite(twin_oscillator_f(), sensor_count, 1, seed)) {
    sensors.push_back({std::move(h), r_scale * Eigen::MatrixXd::Identity(1, 1)});
  }
  return PlantModel(twin_oscillator_f(), q_scale * Eigen::MatrixXd::Identity(4, 4), sensors);
}

DkfInit mean_init(std::uint64_t seed) {
  DkfInit init;
  init.x0_mean = Eigen::VectorXd::Zero(4);
  init.p0 = Eigen::MatrixXd::Identity(4, 4);
  init.mode = DkfInit::Mode::mean;
  init.master_seed = seed;
  return init;
}

}  // namespace

TEST_SUITE_BEGIN("dkf");

TEST_CASE("validate_gains examples") {
  SpectralData narrow;
  narrow.sigma_bar = 14.26;
  CHECK(validate_gains(DkfGains::uniform(3, 0.009, 0.009, 1.0, 1), narrow, true).all_ok);

  // the bound is strict: alpha == 2/sigma_bar^2 fails
  const double bound = narrow.gain_bound();
  const GainReport at_bound =
      validate_gains(DkfGains::uniform(3, bound, bound, 1.0, 1), narrow, false);
  CHECK(!at_bound.all_ok);

  SpectralData wide;
  wide.sigma_bar = 20.0;
  const GainReport report =
      validate_gains(DkfGains::uniform(2, 0.009, 0.009, 1.0, 1), wide, false);
  CHECK(!report.all_ok);  // 0.009 > 2/400
  CHECK(report.bound == doctest::Approx(0.005));
  CHECK_THROWS_AS(validate_gains(DkfGains::uniform(2, 0.009, 0.009, 1.0, 1), wide, true), Error);
}

TEST_CASE("local_predict gains") {
  // scalar plant, two nodes: K_dual = 1/(N*||P_pred|| + eps) = 1/3
  std::vector<Sensor> sensors{
      {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)},
      {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)}};
  const PlantModel model(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1), sensors);

  EstimatorState s = init_estimator(model, 0, Eigen::VectorXd::Constant(1, 2.0),
                                    Eigen::MatrixXd::Identity(1, 1));
  local_predict(s, model, 0, 1.0);
  CHECK(s.x_pred(0) == 0.0);                 // F = 0
  CHECK(s.p_pred(0, 0) == doctest::Approx(1.0));  // P_pred = Q
  CHECK(s.k_dual == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("K_inno equals K_cons H' R^-1 on random instances") {
  const PlantModel model = suite_model(21, 6, 0.4);
  for (int i = 0; i < 6; ++i) {
    EstimatorState s = init_estimator(model, i, Eigen::VectorXd::Zero(4),
                                      Eigen::MatrixXd::Identity(4, 4));
    local_predict(s, model, i, 1.0);
    const Sensor& sensor = model.sensor(i);
    const Eigen::MatrixXd expected =
        s.k_cons * sensor.h.transpose() * spd_inverse(sensor.r);
    CHECK((s.k_inno - expected).norm() / (expected.norm() + 1e-30) < 1e-10);
  }
}

TEST_CASE("estimator initialization follows the algorithm") {
  const PlantModel model = suite_model(23, 4, 0.7);
  const EstimatorState s = init_estimator(model, 2, Eigen::VectorXd::Zero(4),
                                          Eigen::MatrixXd::Identity(4, 4));
  CHECK((invvech(s.theta) - model.sensor_information(2)).norm() < 1e-14);
  CHECK(s.upsilon.norm() == 0.0);
}

TEST_CASE("mailbox enforces neighbor-only reads") {
  const SensorGraph path = build_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  Mailbox box(path);
  box.post(0, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3));
  box.post(2, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3));
  CHECK_NOTHROW(box.from_neighbor(1, 0));
  CHECK_THROWS_AS(box.from_neighbor(0, 2), Error);  // 0 and 2 are not adjacent
}

TEST_CASE("single node: one subiteration reproduces the centralized correction") {
  Eigen::MatrixXd h(2, 4);
  h << 1, 0, 0, 0, 0, 0, 1, 0;
  std::vector<Sensor> sensors{{h, 0.5 * Eigen::MatrixXd::Identity(2, 2)}};
  const PlantModel model(twin_oscillator_f(), 0.05 * Eigen::MatrixXd::Identity(4, 4), sensors);
  const SensorGraph graph = build_graph(1, {});

  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 50, 31, 0);
  const auto traces =
      run_dkf(model, graph, traj, DkfGains::uniform(1, 0.01, 0.01, 1.0, 1), mean_init(31));
  const auto ckf = run_ckf(model, traj, Eigen::VectorXd::Zero(4),
                           Eigen::MatrixXd::Identity(4, 4));
  for (std::size_t k = 0; k < traces.size(); ++k) {
    CHECK((traces[k].nodes[0].x_hat - ckf[k + 1].x_hat).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((traces[k].nodes[0].p - ckf[k + 1].p).norm() < 1e-9);
    CHECK(traces[k].nodes[0].x_hat == traces[k].nodes[0].x_hat);  // no NaNs
  }
}

TEST_CASE("subiterations converge to the consensus oracle") {
  // two nodes, identical priors, l* large: xi reaches the P.1 minimizer
  const SensorGraph pair = build_graph(2, {{0, 1, 1.0}});
  const PlantModel model = suite_model(33, 2, 1.0);
  const SpectralData spec = spectral(pair);
  const double alpha = 0.9 * spec.gain_bound();
  const DkfGains gains = DkfGains::uniform(2, alpha, alpha, 1.0, 500);

  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 1, 35, 0);
  const auto traces = run_dkf(model, pair, traj, gains, mean_init(35));

  CorrectionProblem problem;
  problem.graph = pair;
  const Eigen::MatrixXd p_pred =
      twin_oscillator_f() * twin_oscillator_f().transpose() + 0.05 * Eigen::MatrixXd::Identity(4, 4);
  for (int i = 0; i < 2; ++i) {
    problem.h.push_back(model.sensor(i).h);
    problem.r.push_back(model.sensor(i).r);
    problem.p_pred.push_back(p_pred);
    problem.x_pred.push_back(Eigen::VectorXd::Zero(4));  // F * x0_mean
    problem.y.push_back(traj.measurements[0][static_cast<std::size_t>(i)]);
  }
  const P1Solution oracle = solve_p1(problem);
  for (int i = 0; i < 2; ++i) {
    CHECK((traces[0].nodes[static_cast<std::size_t>(i)].x_hat - oracle.xi_dagger).norm() < 1e-8);
  }
}

TEST_CASE("dual feasibility holds after every subiteration") {
  const SensorGraph graph = random_connected_graph(5, 3, 5);
  const PlantModel model = suite_model(11, 5, 0.5);
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 20, 37, 0);
  DkfInit init = mean_init(37);
  init.mode = DkfInit::Mode::uniform;
  const auto traces = run_dkf(model, graph, traj, DkfGains::uniform(5, alpha, alpha, 1.0, 4),
                              init);
  for (const auto& tr : traces) CHECK(tr.dual_residual_max < 1e-9);
}

TEST_CASE("theta conservation holds at every step") {
  const SensorGraph graph = random_connected_graph(6, 4, 8);
  const PlantModel model = suite_model(41, 6, 0.5);
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 40, 43, 0);
  const auto traces =
      run_dkf(model, graph, traj, DkfGains::uniform(6, alpha, alpha, 1.0, 2), mean_init(43));
  for (const auto& tr : traces) CHECK(tr.theta_conservation_err < 1e-9);
}

TEST_CASE("message accounting and trace dumps") {
  const SensorGraph graph = random_connected_graph(4, 2, 9);  // 5 edges
  const PlantModel model = suite_model(45, 4, 0.5);
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 3, 47, 0);
  const int l_star = 2;
  long long delivered = 0;
  int phase_a = 0, phase_b = 0;
  MessageSink sink = [&](const Message& m) {
    ++delivered;
    (m.phase == 'A' ? phase_a : phase_b)++;
    CHECK(m.vec->size() == 4);
    CHECK(m.sym->size() == 10);
  };
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const auto traces = run_dkf(model, graph, traj, DkfGains::uniform(4, alpha, alpha, 1.0, l_star),
                              mean_init(47), nullptr, &sink);

  const long long per_step = 2ll * l_star * static_cast<long long>(graph.degree_sum());
  for (const auto& tr : traces) CHECK(tr.messages_sent == per_step);
  CHECK(delivered == 3 * per_step);
  CHECK(phase_a == phase_b);
}

TEST_CASE("message payload serialization has the fixed field order") {
  Eigen::VectorXd xi(2);
  xi << 1.5, -2.0;
  Eigen::VectorXd theta(3);
  theta << 0.0, 0.25, 1.0;
  Message m;
  m.from = 3;
  m.to = 1;
  m.k = 7;
  m.l = 2;
  m.phase = 'A';
  m.vec = &xi;
  m.sym = &theta;
  std::ostringstream out;
  write_message_jsonl(out, m);
  CHECK(out.str() ==
        "{\"from\":3,\"to\":1,\"k\":7,\"l\":2,\"phase\":\"A\",\"xi\":[1.5,-2],"
        "\"theta\":[0,0.25,1]}\n");

  m.phase = 'B';
  std::ostringstream out_b;
  write_message_jsonl(out_b, m);
  CHECK(out_b.str().find("\"lambda\":") != std::string::npos);
  CHECK(out_b.str().find("\"upsilon\":") != std::string::npos);
}

TEST_CASE("finalize_step") {
  EstimatorState s;
  s.p_pred = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  s.p_pred_inv = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  s.xi = Eigen::VectorXd::Constant(2, 1.0);

  SUBCASE("zero information rate keeps the predictive covariance") {
    s.theta = Eigen::VectorXd::Zero(3);
    finalize_step(s, PsdGuard::none);
    CHECK((s.p - s.p_pred).norm() < 1e-12);
    CHECK(s.x_hat == s.xi);
  }

  SUBCASE("scalar arithmetic") {
    EstimatorState t;
    t.p_pred = Eigen::MatrixXd::Identity(1, 1);
    t.p_pred_inv = Eigen::MatrixXd::Identity(1, 1);
    t.theta = Eigen::VectorXd::Constant(1, 1.0);
    t.xi = Eigen::VectorXd::Zero(1);
    finalize_step(t, PsdGuard::none);
    CHECK(t.p(0, 0) == doctest::Approx(0.5));
  }

  SUBCASE("require_large_lstar aborts on an indefinite rate") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1, 0, 0, -0.5;
    s.theta = vech(bad);
    CHECK_THROWS_AS(finalize_step(s, PsdGuard::require_large_lstar), Error);
  }
}

TEST_CASE("covariance eigenvalues stay inside the boundedness bracket") {
  // weak sensors keep the posterior floor above 0.9 * lambda_min(Q)
  const SensorGraph graph = random_connected_graph(5, 3, 5);
  const PlantModel model = suite_model(11, 5, 250.0, 1.0);
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();

  const int horizon = 10000;
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), horizon, 51,
                                                   0);
  const auto traces =
      run_dkf(model, graph, traj, DkfGains::uniform(5, alpha, alpha, 1.0, 1), mean_init(51));

  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = 0.0;
  double early_max = 0.0;
  for (const auto& tr : traces) {
    for (const auto& node : tr.nodes) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> post(node.p, Eigen::EigenvaluesOnly);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pred(node.p_pred, Eigen::EigenvaluesOnly);
      min_eig = std::min({min_eig, post.eigenvalues().minCoeff(), pred.eigenvalues().minCoeff()});
      max_eig = std::max({max_eig, post.eigenvalues().maxCoeff(), pred.eigenvalues().maxCoeff()});
      if (tr.k <= 100) early_max = std::max(early_max, pred.eigenvalues().maxCoeff());
    }
  }

  // fixed upper bound: Riccati equation with the information rate halved
  // (kappa = 1/2) and q-bar covering the transient
  const double q_bar = early_max;
  const Eigen::MatrixXd half_rate = 0.5 * model.information_rate();
  Eigen::MatrixXd p_bar = q_bar * Eigen::MatrixXd::Identity(4, 4);
  for (int it = 0; it < 100000; ++it) {
    const Eigen::MatrixXd next =
        model.f() * spd_inverse(spd_inverse(p_bar) + half_rate) * model.f().transpose() +
        q_bar * Eigen::MatrixXd::Identity(4, 4);
    const double change = (next - p_bar).norm() / next.norm();
    p_bar = next;
    if (change < 1e-12) break;
  }
  const double p_bar_top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                               p_bar, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .maxCoeff();

  CHECK(min_eig >= 0.9 * 1.0);  // lambda_min(Q) = 1
  CHECK(max_eig <= 1.1 * p_bar_top);
}

TEST_CASE("information rate sandwich settles for kappa = 1/2") {
  const SensorGraph graph = random_connected_graph(5, 3, 5);
  const PlantModel model = suite_model(11, 5, 0.5);
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 120, 53, 0);
  const auto traces =
      run_dkf(model, graph, traj, DkfGains::uniform(5, alpha, alpha, 1.0, 1), mean_init(53));

  const Eigen::MatrixXd theta_dagger = model.information_rate();
  auto sandwiched = [&](const RoundTrace& tr) {
    for (const auto& node : tr.nodes) {
      const Eigen::MatrixXd theta = invvech(node.theta);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> low(theta - 0.5 * theta_dagger,
                                                         Eigen::EigenvaluesOnly);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> high(1.5 * theta_dagger - theta,
                                                          Eigen::EigenvaluesOnly);
      if (low.eigenvalues().minCoeff() < -1e-9 || high.eigenvalues().minCoeff() < -1e-9) {
        return false;
      }
    }
    return true;
  };

  int k_bar = -1;
  for (const auto& tr : traces) {
    if (sandwiched(tr)) {
      k_bar = tr.k;
      break;
    }
  }
  REQUIRE(k_bar > 0);
  CHECK(k_bar <= 60);
  for (const auto& tr : traces) {
    if (tr.k >= k_bar) CHECK(sandwiched(tr));
  }
}

TEST_CASE("runs are bit-reproducible") {
  const SensorGraph graph = random_connected_graph(4, 2, 3);
  const PlantModel model = suite_model(55, 4, 0.5);
  const SpectralData spec = spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const DkfGains gains = DkfGains::uniform(4, alpha, alpha, 1.0, 2);
  const TruthTrajectory traj = simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                   Eigen::MatrixXd::Identity(4, 4), 25, 57, 0);
  DkfInit init = mean_init(57);
  init.mode = DkfInit::Mode::uniform;

  const auto a = run_dkf(model, graph, traj, gains, init);
  const auto b = run_dkf(model, graph, traj, gains, init);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (int i = 0; i < 4; ++i) {
      CHECK(a[k].nodes[static_cast<std::size_t>(i)].x_hat ==
            b[k].nodes[static_cast<std::size_t>(i)].x_hat);
      CHECK(a[k].nodes[static_cast<std::size_t>(i)].p ==
            b[k].nodes[static_cast<std::size_t>(i)].p);
    }
  }
}

TEST_SUITE_END();
