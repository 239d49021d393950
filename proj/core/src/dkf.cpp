#include "dkflab/dkf.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dkflab/matrixtools.hpp"
#include "dkflab/rng.hpp"

namespace dkflab {

DkfGains DkfGains::uniform(int node_count, double alpha_lambda, double alpha_upsilon,
                           double epsilon, int l_star, PsdGuard guard) {
  DkfGains g;
  g.alpha_lambda = Eigen::VectorXd::Constant(node_count, alpha_lambda);
  g.alpha_upsilon = Eigen::VectorXd::Constant(node_count, alpha_upsilon);
  g.epsilon = Eigen::VectorXd::Constant(node_count, epsilon);
  g.l_star = l_star;
  g.guard = guard;
  return g;
}

GainReport validate_gains(const DkfGains& gains, const SpectralData& spectral, bool strict) {
  if (gains.l_star < 1) raise(Errc::ConfigError, "validate_gains: l_star must be >= 1");
  if ((gains.epsilon.array() <= 0.0).any()) {
    raise(Errc::ConfigError, "validate_gains: epsilon must be positive");
  }
  GainReport report;
  report.bound = spectral.gain_bound();
  report.all_ok = true;
  for (int i = 0; i < static_cast<int>(gains.alpha_lambda.size()); ++i) {
    GainCheck c;
    c.node = i;
    c.alpha_lambda = gains.alpha_lambda[i];
    c.alpha_upsilon = gains.alpha_upsilon[i];
    c.lambda_ok = c.alpha_lambda > 0.0 && c.alpha_lambda < report.bound;  // strict inequality
    c.upsilon_ok = c.alpha_upsilon > 0.0 && c.alpha_upsilon < report.bound;
    report.all_ok = report.all_ok && c.lambda_ok && c.upsilon_ok;
    report.nodes.push_back(c);
  }
  if (strict && !report.all_ok) {
    raise(Errc::GainOutOfRange,
          "validate_gains: some alpha not in (0, " + std::to_string(report.bound) + ")");
  }
  return report;
}

EstimatorState init_estimator(const PlantModel& model, int node, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& p0) {
  if (!is_positive_definite(p0)) raise(Errc::NotPositiveDefinite, "init_estimator: P0");
  EstimatorState s;
  s.x_hat = x0;
  s.p = symmetrize(p0);
  s.omega_delta = vech(model.sensor_information(node));
  s.theta = s.omega_delta;
  s.upsilon = Eigen::VectorXd::Zero(s.theta.size());
  return s;
}

void local_predict(EstimatorState& state, const PlantModel& model, int node, double epsilon) {
  const double n_nodes = static_cast<double>(model.sensor_count());
  state.x_pred = model.f() * state.x_hat;
  state.p_pred = symmetrize(model.f() * state.p * model.f().transpose() + model.q());
  state.p_pred_inv = spd_inverse(state.p_pred, "local_predict: P_pred");

  const Sensor& sensor = model.sensor(node);
  const Eigen::MatrixXd r_inv = spd_inverse(sensor.r, "local_predict: R");
  state.k_cons = spd_inverse(sensor.h.transpose() * r_inv * sensor.h + state.p_pred_inv / n_nodes,
                             "local_predict: K_cons");
  state.k_inno = state.k_cons * sensor.h.transpose() * r_inv;
  // ||N P_pred|| in the induced 2-norm; P_pred is SPD so this is N times its
  // largest eigenvalue.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(state.p_pred, Eigen::EigenvaluesOnly);
  state.k_dual = 1.0 / (n_nodes * es.eigenvalues().maxCoeff() + epsilon);
}

void begin_correction(EstimatorState& state, const PlantModel& model, int node,
                      const Eigen::VectorXd& y) {
  const Sensor& sensor = model.sensor(node);
  state.xi = state.x_pred;
  state.lambda = Eigen::VectorXd::Zero(state.x_pred.size());
  state.xi_base = state.x_pred + state.k_inno * (y - sensor.h * state.x_pred);
}

void Mailbox::post(int from, Eigen::VectorXd vec, Eigen::VectorXd sym) {
  auto& slot = slots_[static_cast<std::size_t>(from)];
  slot.vec = std::move(vec);
  slot.sym = std::move(sym);
}

const Mailbox::Payload& Mailbox::from_neighbor(int reader, int neighbor) const {
  const auto& adj = graph_->neighbors[static_cast<std::size_t>(reader)];
  if (!std::binary_search(adj.begin(), adj.end(), neighbor)) {
    raise(Errc::ConfigError, "Mailbox: node " + std::to_string(reader) +
                                 " may not read non-neighbor " + std::to_string(neighbor));
  }
  return slots_[static_cast<std::size_t>(neighbor)];
}

namespace {

void append_vector(std::string& out, const Eigen::VectorXd& v) {
  char buf[32];
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    out += buf;
  }
  out += ']';
}

void deliver(const Mailbox& mailbox, const SensorGraph& graph, int k, int l, char phase,
             const MessageSink* sink) {
  if (!sink) return;
  for (int i = 0; i < graph.node_count; ++i) {
    for (int j : graph.neighbors[static_cast<std::size_t>(i)]) {
      const auto& payload = mailbox.from_neighbor(j, i);
      Message msg;
      msg.from = i;
      msg.to = j;
      msg.k = k;
      msg.l = l;
      msg.phase = phase;
      msg.vec = &payload.vec;
      msg.sym = &payload.sym;
      (*sink)(msg);
    }
  }
}

}  // namespace

void write_message_jsonl(std::ostream& out, const Message& message) {
  std::string line;
  line.reserve(256);
  line += "{\"from\":" + std::to_string(message.from);
  line += ",\"to\":" + std::to_string(message.to);
  line += ",\"k\":" + std::to_string(message.k);
  line += ",\"l\":" + std::to_string(message.l);
  line += ",\"phase\":\"";
  line += message.phase;
  line += '"';
  line += message.phase == 'A' ? ",\"xi\":" : ",\"lambda\":";
  append_vector(line, *message.vec);
  line += message.phase == 'A' ? ",\"theta\":" : ",\"upsilon\":";
  append_vector(line, *message.sym);
  line += "}\n";
  out << line;
}

void correction_subiteration(std::vector<EstimatorState>& states, const SensorGraph& graph,
                             const DkfGains& gains, int k, int l, const MessageSink* sink) {
  const int n_nodes = graph.node_count;

  // Phase A: broadcast (xi_l, theta_l); gradient ascent on the duals.
  Mailbox phase_a(graph);
  for (int i = 0; i < n_nodes; ++i) phase_a.post(i, states[i].xi, states[i].theta);
  deliver(phase_a, graph, k, l, 'A', sink);
  for (int i = 0; i < n_nodes; ++i) {
    EstimatorState& s = states[static_cast<std::size_t>(i)];
    Eigen::VectorXd xi_disagree = Eigen::VectorXd::Zero(s.xi.size());
    Eigen::VectorXd theta_disagree = Eigen::VectorXd::Zero(s.theta.size());
    for (int j : graph.neighbors[static_cast<std::size_t>(i)]) {
      const auto& payload = phase_a.from_neighbor(i, j);
      const double a_ij = graph.weight(i, j);
      xi_disagree += a_ij * (s.xi - payload.vec);
      theta_disagree += a_ij * (s.theta - payload.sym);
    }
    s.lambda += gains.alpha_lambda[i] * s.k_dual * xi_disagree;
    s.upsilon += gains.alpha_upsilon[i] * theta_disagree;
  }

  // Phase B: broadcast (lambda_{l+1}, upsilon_{l+1}); exact primal updates.
  Mailbox phase_b(graph);
  for (int i = 0; i < n_nodes; ++i) phase_b.post(i, states[i].lambda, states[i].upsilon);
  deliver(phase_b, graph, k, l, 'B', sink);
  for (int i = 0; i < n_nodes; ++i) {
    EstimatorState& s = states[static_cast<std::size_t>(i)];
    Eigen::VectorXd lambda_disagree = Eigen::VectorXd::Zero(s.lambda.size());
    Eigen::VectorXd upsilon_disagree = Eigen::VectorXd::Zero(s.upsilon.size());
    for (int j : graph.neighbors[static_cast<std::size_t>(i)]) {
      const auto& payload = phase_b.from_neighbor(i, j);
      const double a_ij = graph.weight(i, j);
      lambda_disagree += a_ij * (s.lambda - payload.vec);
      upsilon_disagree += a_ij * (s.upsilon - payload.sym);
    }
    s.xi = s.xi_base - s.k_cons * lambda_disagree;
    s.theta = static_cast<double>(n_nodes) * s.omega_delta - upsilon_disagree;
  }
}

void finalize_step(EstimatorState& state, PsdGuard guard) {
  Eigen::MatrixXd theta = invvech(state.theta);
  switch (guard) {
    case PsdGuard::none:
      break;
    case PsdGuard::project:
      theta = psd_project(theta);
      break;
    case PsdGuard::require_large_lstar: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-9) {
        raise(Errc::NotPositiveDefinite, "finalize_step: Theta indefinite; increase l_star");
      }
      break;
    }
  }
  state.x_hat = state.xi;
  state.p = spd_inverse(state.p_pred_inv + theta, "finalize_step: P");
}

std::vector<Eigen::VectorXd> initial_estimates(const DkfInit& init, int node_count) {
  std::vector<Eigen::VectorXd> x0s;
  x0s.reserve(static_cast<std::size_t>(node_count));
  const auto n = init.x0_mean.size();
  for (int i = 0; i < node_count; ++i) {
    Eigen::VectorXd x0 = init.x0_mean;
    if (init.mode == DkfInit::Mode::uniform) {
      Rng rng = Rng::stream(init.master_seed, "estimate_init", init.trial,
                            static_cast<std::uint64_t>(i));
      for (Eigen::Index c = 0; c < n; ++c) x0[c] = rng.uniform(-init.range, init.range);
    }
    x0s.push_back(std::move(x0));
  }
  return x0s;
}

std::vector<RoundTrace> run_dkf(const PlantModel& model, const SensorGraph& graph,
                                const TruthTrajectory& trajectory, const DkfGains& gains,
                                const DkfInit& init, const Eigen::MatrixXd* p_star,
                                const MessageSink* sink) {
  const int n_nodes = graph.node_count;
  if (n_nodes != model.sensor_count()) {
    raise(Errc::ConfigError, "run_dkf: one estimator per sensor required");
  }
  if (gains.l_star < 1) raise(Errc::ConfigError, "run_dkf: l_star must be >= 1");

  const Eigen::MatrixXd theta_dagger = model.information_rate();
  const double conservation_scale =
      std::max(static_cast<double>(n_nodes) * theta_dagger.norm(), 1e-300);
  std::vector<Eigen::MatrixXd> info_gain;  // H_i' R_i^{-1} per node
  info_gain.reserve(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    const Sensor& sensor = model.sensor(i);
    info_gain.push_back(sensor.h.transpose() * spd_inverse(sensor.r, "run_dkf: R"));
  }

  const std::vector<Eigen::VectorXd> x0s = initial_estimates(init, n_nodes);
  std::vector<EstimatorState> states;
  states.reserve(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    states.push_back(init_estimator(model, i, x0s[static_cast<std::size_t>(i)], init.p0));
  }

  std::vector<RoundTrace> traces;
  traces.reserve(trajectory.measurements.size());

  for (int k = 1; k <= trajectory.horizon(); ++k) {
    const auto& ys = trajectory.measurements[static_cast<std::size_t>(k - 1)];
    RoundTrace trace;
    trace.k = k;

    for (int i = 0; i < n_nodes; ++i) {
      local_predict(states[i], model, i, gains.epsilon[i]);
      begin_correction(states[i], model, i, ys[static_cast<std::size_t>(i)]);
    }

    if (p_star) {
      double worst = 0.0;
      for (const auto& s : states) worst = std::max(worst, (*p_star - s.p_pred).norm());
      trace.cov_err_max = worst;
    } else {
      trace.cov_err_max = std::numeric_limits<double>::quiet_NaN();
    }

    for (int l = 0; l < gains.l_star; ++l) {
      correction_subiteration(states, graph, gains, k, l, sink);

      // Dual feasibility residual of the iterate (holds for every l >= 1).
      double res_sq = 0.0;
      for (int i = 0; i < n_nodes; ++i) {
        const EstimatorState& s = states[static_cast<std::size_t>(i)];
        const Sensor& sensor = model.sensor(i);
        Eigen::VectorXd r = -(info_gain[static_cast<std::size_t>(i)] * (ys[i] - sensor.h * s.xi) +
                              s.p_pred_inv / n_nodes * (s.x_pred - s.xi));
        for (int j : graph.neighbors[static_cast<std::size_t>(i)]) {
          r += graph.weight(i, j) * (s.lambda - states[static_cast<std::size_t>(j)].lambda);
        }
        res_sq += r.squaredNorm();
      }
      trace.dual_residual_max = std::max(trace.dual_residual_max, std::sqrt(res_sq));

      Eigen::VectorXd theta_sum = Eigen::VectorXd::Zero(states[0].theta.size());
      for (const auto& s : states) theta_sum += s.theta;
      const double conservation =
          (invvech(theta_sum) - static_cast<double>(n_nodes) * theta_dagger).norm() /
          conservation_scale;
      trace.theta_conservation_err = std::max(trace.theta_conservation_err, conservation);
    }

    trace.messages_sent = 2ll * gains.l_star * static_cast<long long>(graph.degree_sum());

    for (auto& s : states) finalize_step(s, gains.guard);

    const Eigen::VectorXd& x_true = trajectory.states[static_cast<std::size_t>(k)];
    double mse = 0.0;
    double theta_err = 0.0;
    trace.nodes.reserve(static_cast<std::size_t>(n_nodes));
    for (const auto& s : states) {
      mse += (x_true - s.x_hat).squaredNorm();
      theta_err = std::max(theta_err, (invvech(s.theta) - theta_dagger).norm());
      trace.nodes.push_back({s.x_hat, s.p, s.p_pred, s.theta});
    }
    trace.mse = mse / n_nodes;
    trace.theta_err_max = theta_err;
    double disagreement = 0.0;
    for (int i = 0; i < n_nodes; ++i)
      for (int j = i + 1; j < n_nodes; ++j)
        disagreement = std::max(disagreement, (states[i].x_hat - states[j].x_hat).norm());
    trace.consensus_disagreement = disagreement;

    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace dkflab
