#include "dkflab/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dkflab/matrixtools.hpp"

namespace dkflab {
namespace {

int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("DKFLAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
  }
  return static_cast<int>(hw);
}

void append_field(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void for_each_trial(int trials, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), trials);
  if (workers <= 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) fn(t);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double MetricsTable::steady_state_mse(int from_k) const {
  double sum = 0.0;
  long long count = 0;
  for (const auto& row : rows) {
    if (row.k >= from_k) {
      sum += row.mse;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double MetricsTable::final_cov_err() const {
  int last_k = 0;
  for (const auto& row : rows) last_k = std::max(last_k, row.k);
  double worst = 0.0;
  for (const auto& row : rows)
    if (row.k == last_k) worst = std::max(worst, row.cov_err_max);
  return worst;
}

std::string to_csv(const MetricsTable& table) {
  std::string out = MetricsTable::kHeader;
  out += '\n';
  for (const auto& row : table.rows) {
    out += std::to_string(row.trial);
    out += ',';
    out += std::to_string(row.k);
    out += ',';
    append_field(out, row.mse);
    out += ',';
    append_field(out, row.cov_err_max);
    out += ',';
    append_field(out, row.consensus_disagreement);
    out += ',';
    append_field(out, row.dual_residual_max);
    out += ',';
    append_field(out, row.theta_err_max);
    out += ',';
    out += std::to_string(row.messages);
    out += '\n';
  }
  return out;
}

void write_csv(const MetricsTable& table, const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) raise(Errc::ConfigError, "write_csv: cannot open '" + path + "'");
  out << to_csv(table);
}

RunArtifacts run_experiment(const ExperimentConfig& config, int l_star) {
  const PlantModel model = config.build_model();
  if (config.graph.node_count != model.sensor_count()) {
    raise(Errc::ConfigError, "run_experiment: graph nodes != sensors");
  }
  const SpectralData spec = spectral(config.graph, config.sigma_bar);
  const DkfGains gains = config.build_gains(l_star);
  validate_gains(gains, spec, config.strict_gains);

  const DareSolution dare =
      solve_dare(config.f, model.stacked_h(), config.q, model.stacked_r());

  RunArtifacts artifacts;
  artifacts.sigma_n = spec.sigma_n();
  artifacts.sigma_bar = spec.sigma_bar;
  artifacts.gain_bound = spec.gain_bound();
  artifacts.dare_residual = dare.residual;
  artifacts.dare_iterations = dare.iterations;
  artifacts.p_star_trace = dare.p_star.trace();
  artifacts.l_star = l_star;

  std::vector<std::vector<MetricsRow>> per_trial(static_cast<std::size_t>(config.trials));
  std::vector<std::vector<MetricsRow>> per_trial_ckf(static_cast<std::size_t>(config.trials));

  const Eigen::MatrixXd theta_dagger = model.information_rate();

  for_each_trial(config.trials, [&](int trial) {
    const TruthTrajectory traj =
        simulate_trajectory(model, config.x0_mean, config.p0_truth, config.horizon,
                            config.master_seed, static_cast<std::uint64_t>(trial));
    const DkfInit init = config.build_init(trial);
    const auto traces = run_dkf(model, config.graph, traj, gains, init, &dare.p_star);

    auto& rows = per_trial[static_cast<std::size_t>(trial)];
    rows.reserve(traces.size() + 1);

    // Initial (k = 0) row: diagnostics of the starting condition.
    {
      const auto x0s = initial_estimates(init, config.graph.node_count);
      MetricsRow row;
      row.trial = trial;
      row.k = 0;
      const Eigen::MatrixXd p_pred_0 =
          symmetrize(config.f * config.p_i0 * config.f.transpose() + config.q);
      row.cov_err_max = (dare.p_star - p_pred_0).norm();
      double mse = 0.0;
      for (const auto& x0 : x0s) mse += (traj.states[0] - x0).squaredNorm();
      row.mse = mse / static_cast<double>(x0s.size());
      for (std::size_t i = 0; i < x0s.size(); ++i)
        for (std::size_t j = i + 1; j < x0s.size(); ++j)
          row.consensus_disagreement =
              std::max(row.consensus_disagreement, (x0s[i] - x0s[j]).norm());
      for (int i = 0; i < model.sensor_count(); ++i) {
        row.theta_err_max =
            std::max(row.theta_err_max, (model.sensor_information(i) - theta_dagger).norm());
      }
      rows.push_back(row);
    }

    for (const auto& tr : traces) {
      MetricsRow row;
      row.trial = trial;
      row.k = tr.k;
      row.mse = tr.mse;
      row.cov_err_max = tr.cov_err_max;
      row.consensus_disagreement = tr.consensus_disagreement;
      row.dual_residual_max = tr.dual_residual_max;
      row.theta_err_max = tr.theta_err_max;
      row.messages = tr.messages_sent;
      rows.push_back(row);
    }

    if (config.with_ckf) {
      const auto states = run_ckf(model, traj, config.x0_mean, config.p_i0);
      auto& ckf_rows = per_trial_ckf[static_cast<std::size_t>(trial)];
      ckf_rows.reserve(states.size() - 1);
      for (std::size_t k = 1; k < states.size(); ++k) {
        MetricsRow row;
        row.trial = trial;
        row.k = static_cast<int>(k);
        row.mse = (traj.states[k] - states[k].x_hat).squaredNorm();
        row.cov_err_max = (dare.p_star - states[k].p_pred).norm();
        ckf_rows.push_back(row);
      }
    }
  });

  for (auto& rows : per_trial) {
    for (auto& row : rows) artifacts.total_messages += row.messages;
    artifacts.metrics.rows.insert(artifacts.metrics.rows.end(), rows.begin(), rows.end());
  }
  for (auto& rows : per_trial_ckf) {
    artifacts.ckf_metrics.rows.insert(artifacts.ckf_metrics.rows.end(), rows.begin(), rows.end());
  }
  return artifacts;
}

CompareReport compare_ckf(const ExperimentConfig& config, int l_star) {
  const PlantModel model = config.build_model();
  if (config.graph.node_count != model.sensor_count()) {
    raise(Errc::ConfigError, "compare_ckf: graph nodes != sensors");
  }
  const SpectralData spec = spectral(config.graph, config.sigma_bar);
  const DkfGains gains = config.build_gains(l_star);
  validate_gains(gains, spec, config.strict_gains);

  const TruthTrajectory traj = simulate_trajectory(model, config.x0_mean, config.p0_truth,
                                                   config.horizon, config.master_seed, 0);
  const auto traces = run_dkf(model, config.graph, traj, gains, config.build_init(0));
  const auto ckf_states = run_ckf(model, traj, config.x0_mean, config.p_i0);

  CompareReport report;
  report.est_gap.reserve(traces.size());
  report.cov_gap.reserve(traces.size());
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const CkfState& c = ckf_states[k + 1];
    double est = 0.0;
    double cov = 0.0;
    for (const auto& node : traces[k].nodes) {
      est = std::max(est, (node.x_hat - c.x_hat).cwiseAbs().maxCoeff());
      cov = std::max(cov, (node.p - c.p).norm());
    }
    report.est_gap.push_back(est);
    report.cov_gap.push_back(cov);
    report.max_est_gap = std::max(report.max_est_gap, est);
  }
  report.final_cov_gap = report.cov_gap.empty() ? 0.0 : report.cov_gap.back();
  return report;
}

}  // namespace dkflab
