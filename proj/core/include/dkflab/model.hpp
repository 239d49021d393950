#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "dkflab/errors.hpp"
#include "dkflab/rng.hpp"

namespace dkflab {

struct Sensor {
  Eigen::MatrixXd h;  // m_i x n
  Eigen::MatrixXd r;  // m_i x m_i, positive definite
};

/// Linear plant x' = Fx + w, y_i = H_i x + v_i with a partitioned sensor
/// suite. Construction validates Q > 0, every R_i > 0 and collective
/// observability of the stacked pair (F, H); individual pairs (F, H_i) are
/// allowed to be unobservable.
class PlantModel {
 public:
  PlantModel(Eigen::MatrixXd f, Eigen::MatrixXd q, std::vector<Sensor> sensors);

  const Eigen::MatrixXd& f() const { return f_; }
  const Eigen::MatrixXd& q() const { return q_; }
  const std::vector<Sensor>& sensors() const { return sensors_; }
  const Sensor& sensor(int i) const { return sensors_[static_cast<std::size_t>(i)]; }

  int state_dim() const { return static_cast<int>(f_.rows()); }
  int sensor_count() const { return static_cast<int>(sensors_.size()); }
  int total_meas_dim() const { return total_meas_dim_; }

  Eigen::MatrixXd stacked_h() const;       // m x n
  Eigen::MatrixXd stacked_r() const;       // block diag{R_1..R_N}
  /// Global information rate Θ† = Σ_i H_iᵀ R_i⁻¹ H_i = Hᵀ R̄⁻¹ H.
  Eigen::MatrixXd information_rate() const;
  /// H_iᵀ R_i⁻¹ H_i of one sensor.
  Eigen::MatrixXd sensor_information(int i) const;

  const Eigen::MatrixXd& q_chol() const { return q_chol_; }
  const Eigen::MatrixXd& r_chol(int i) const { return r_chols_[static_cast<std::size_t>(i)]; }

 private:
  Eigen::MatrixXd f_, q_, q_chol_;
  std::vector<Sensor> sensors_;
  std::vector<Eigen::MatrixXd> r_chols_;
  int total_meas_dim_ = 0;
};

/// mean + chol(P0)·z with z standard normal. Requires P0 > 0.
Eigen::VectorXd sample_initial(const Eigen::VectorXd& mean, const Eigen::MatrixXd& p0, Rng& rng);

/// One step of the truth dynamics: Fx + chol(Q)·z.
Eigen::VectorXd step_truth(const Eigen::VectorXd& x, const PlantModel& model, Rng& rng);

/// Per-sensor measurements y_i = H_i x + chol(R_i)·z_i. One independent
/// stream per sensor, so sensor draws never interleave.
std::vector<Eigen::VectorXd> measure(const Eigen::VectorXd& x, const PlantModel& model,
                                     std::span<Rng> sensor_rngs);

/// Random {-1, 0, 1} output matrices, rejection-sampled until the stacked
/// pair (F, H) is observable. Deterministic per seed.
std::vector<Eigen::MatrixXd> random_sensor_suite(const Eigen::MatrixXd& f, int sensor_count,
                                                 int meas_dim, std::uint64_t seed);

/// Ground-truth states x_0..x_K plus per-step, per-sensor measurements
/// (measurements[k-1][i] is y_{i,k}). Bit-reproducible from (model, seed).
struct TruthTrajectory {
  std::vector<Eigen::VectorXd> states;
  std::vector<std::vector<Eigen::VectorXd>> measurements;
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;

  int horizon() const { return static_cast<int>(measurements.size()); }
};

TruthTrajectory simulate_trajectory(const PlantModel& model, const Eigen::VectorXd& x0_mean,
                                    const Eigen::MatrixXd& p0, int horizon,
                                    std::uint64_t master_seed, std::uint64_t trial = 0);

}  // namespace dkflab
