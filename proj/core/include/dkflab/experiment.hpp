#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dkflab/ckf.hpp"
#include "dkflab/dkf.hpp"
#include "dkflab/graph.hpp"
#include "dkflab/model.hpp"

namespace dkflab {

/// Declarative experiment input. Loaded from a JSON config file (schema in
/// the README); generators for the graph and the sensor suite are expanded
/// at load time, so a loaded config is fully materialized and deterministic.
struct ExperimentConfig {
  // model
  Eigen::MatrixXd f;
  Eigen::MatrixXd q;
  std::vector<Sensor> sensors;

  // graph
  SensorGraph graph;
  std::optional<double> sigma_bar;

  // gains
  Eigen::VectorXd alpha_lambda;
  Eigen::VectorXd alpha_upsilon;
  Eigen::VectorXd epsilon;
  std::vector<int> l_star_values;  // singleton unless the config sweeps l*
  PsdGuard guard = PsdGuard::project;
  bool strict_gains = true;

  // run
  int horizon = 100;
  int trials = 1;
  std::uint64_t master_seed = 1;
  bool with_ckf = false;
  std::string out_dir = "results";

  // init
  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd p0_truth;
  Eigen::MatrixXd p_i0;
  DkfInit::Mode init_mode = DkfInit::Mode::uniform;
  double init_range = 1.0;

  // provenance
  std::string config_hash;  // FNV-1a of the canonical config text

  PlantModel build_model() const;
  DkfGains build_gains(int l_star) const;
  DkfInit build_init(std::uint64_t trial) const;
};

/// Parses and validates a config file; throws ConfigError with a schema
/// message on any problem.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig load_config_text(const std::string& text);

/// Runs fn(trial) for every trial in [0, trials) on a worker pool capped by
/// DKFLAB_THREADS. Trials must be independent; exceptions are rethrown.
void for_each_trial(int trials, const std::function<void(int)>& fn);

struct MetricsRow {
  int trial = 0;
  int k = 0;
  double mse = 0.0;
  double cov_err_max = 0.0;
  double consensus_disagreement = 0.0;
  double dual_residual_max = 0.0;
  double theta_err_max = 0.0;
  long long messages = 0;
};

/// Rows keyed (trial, k); column set and order are fixed and stable.
struct MetricsTable {
  static constexpr const char* kHeader =
      "trial,k,mse,cov_err_max,consensus_disagreement,dual_residual_max,theta_err_max,messages";

  std::vector<MetricsRow> rows;

  double steady_state_mse(int from_k) const;  // mean of mse over rows with k >= from_k
  double final_cov_err() const;               // max over trials at the last step
};

std::string to_csv(const MetricsTable& table);
void write_csv(const MetricsTable& table, const std::string& path);

struct RunArtifacts {
  MetricsTable metrics;
  MetricsTable ckf_metrics;  // (trial, k, mse) baseline; other columns zero
  double sigma_n = 0.0;
  double sigma_bar = 0.0;
  double gain_bound = 0.0;
  double dare_residual = 0.0;
  int dare_iterations = 0;
  double p_star_trace = 0.0;
  long long total_messages = 0;
  int l_star = 1;
};

/// Monte Carlo battery of DA-DKF runs; trials fan out to a worker pool
/// (capped by DKFLAB_THREADS) and rows are emitted in (trial, k) order, so
/// the output is byte-identical for identical (config, master_seed).
RunArtifacts run_experiment(const ExperimentConfig& config, int l_star);

inline RunArtifacts run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, config.l_star_values.front());
}

struct CompareReport {
  std::vector<double> est_gap;   // per step: max_i max-abs-component gap vs CKF
  std::vector<double> cov_gap;   // per step: max_i ||P_i - P_ckf||_F (posterior)
  double max_est_gap = 0.0;
  double final_cov_gap = 0.0;
};

/// Runs DA-DKF and the centralized filter on the identical trajectory
/// (trial 0 of the config) and reports the per-step gaps.
CompareReport compare_ckf(const ExperimentConfig& config, int l_star);

inline CompareReport compare_ckf(const ExperimentConfig& config) {
  return compare_ckf(config, config.l_star_values.front());
}

}  // namespace dkflab
