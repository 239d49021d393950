#include <benchmark/benchmark.h>

#include "dkflab/dkf.hpp"
#include "dkflab/graph.hpp"
#include "dkflab/matrixtools.hpp"
#include "dkflab/model.hpp"

namespace {

Eigen::MatrixXd twin_oscillator_f() {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
  f << 0.4, 0.9, 0, 0, -0.9, 0.4, 0, 0, 0, 0, 0.5, 0.8, 0, 0, -0.8, 0.5;
  return f;
}

dkflab::PlantModel make_model(int sensors) {
  std::vector<dkflab::Sensor> list;
  for (auto& h : dkflab::random_sensor_suite(twin_oscillator_f(), sensors, 1, 3)) {
    list.push_back({std::move(h), 0.05 * Eigen::MatrixXd::Identity(1, 1)});
  }
  return {twin_oscillator_f(), 0.05 * Eigen::MatrixXd::Identity(4, 4), std::move(list)};
}

void BM_dkf_step(benchmark::State& state) {
  const int n_nodes = static_cast<int>(state.range(0));
  const auto graph = dkflab::random_connected_graph(n_nodes, 3 * n_nodes, 7);
  const auto model = make_model(n_nodes);
  const auto spec = dkflab::spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const auto gains = dkflab::DkfGains::uniform(n_nodes, alpha, alpha, 1.0, 1);
  const auto traj = dkflab::simulate_trajectory(model, Eigen::VectorXd::Zero(4),
                                                Eigen::MatrixXd::Identity(4, 4), 8, 1, 0);
  dkflab::DkfInit init;
  init.x0_mean = Eigen::VectorXd::Zero(4);
  init.p0 = Eigen::MatrixXd::Identity(4, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dkflab::run_dkf(model, graph, traj, gains, init));
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_dkf_step)->Arg(10)->Arg(50)->Arg(100);

void BM_subiteration(benchmark::State& state) {
  const int n_nodes = static_cast<int>(state.range(0));
  const auto graph = dkflab::random_connected_graph(n_nodes, 3 * n_nodes, 7);
  const auto model = make_model(n_nodes);
  const auto spec = dkflab::spectral(graph);
  const double alpha = 0.9 * spec.gain_bound();
  const auto gains = dkflab::DkfGains::uniform(n_nodes, alpha, alpha, 1.0, 1);

  std::vector<dkflab::EstimatorState> states;
  dkflab::Rng rng(5);
  for (int i = 0; i < n_nodes; ++i) {
    auto s = dkflab::init_estimator(model, i, rng.normal_vector(4),
                                    Eigen::MatrixXd::Identity(4, 4));
    dkflab::local_predict(s, model, i, 1.0);
    dkflab::begin_correction(s, model, i, rng.normal_vector(1));
    states.push_back(std::move(s));
  }
  for (auto _ : state) {
    dkflab::correction_subiteration(states, graph, gains, 1, 0);
    benchmark::DoNotOptimize(states.data());
  }
}
BENCHMARK(BM_subiteration)->Arg(10)->Arg(100)->Arg(300);

void BM_solve_dare(benchmark::State& state) {
  const auto model = make_model(static_cast<int>(state.range(0)));
  const Eigen::MatrixXd h = model.stacked_h();
  const Eigen::MatrixXd r = model.stacked_r();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dkflab::solve_dare(model.f(), h, model.q(), r));
  }
}
BENCHMARK(BM_solve_dare)->Arg(10)->Arg(100);

void BM_spectral(benchmark::State& state) {
  const auto graph =
      dkflab::random_connected_graph(static_cast<int>(state.range(0)), 300, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dkflab::spectral(graph));
  }
}
BENCHMARK(BM_spectral)->Arg(100)->Arg(300);

void BM_psd_project(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dkflab::Rng rng(9);
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = rng.normal();
  m = dkflab::symmetrize(m);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dkflab::psd_project(m));
  }
}
BENCHMARK(BM_psd_project)->Arg(4)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
