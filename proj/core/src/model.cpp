#include "dkflab/model.hpp"

#include <string>

#include "dkflab/matrixtools.hpp"

namespace dkflab {
namespace {

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& m, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) raise(Errc::NotPositiveDefinite, who);
  return llt.matrixL();
}

}  // namespace

PlantModel::PlantModel(Eigen::MatrixXd f, Eigen::MatrixXd q, std::vector<Sensor> sensors)
    : f_(std::move(f)), q_(std::move(q)), sensors_(std::move(sensors)) {
  if (f_.rows() != f_.cols()) raise(Errc::ConfigError, "PlantModel: F not square");
  if (q_.rows() != f_.rows() || q_.cols() != f_.cols()) {
    raise(Errc::ConfigError, "PlantModel: Q dimension mismatch");
  }
  if (sensors_.empty()) raise(Errc::ConfigError, "PlantModel: no sensors");
  q_chol_ = lower_cholesky(q_, "PlantModel: Q");
  for (std::size_t i = 0; i < sensors_.size(); ++i) {
    const Sensor& s = sensors_[i];
    if (s.h.cols() != f_.rows()) raise(Errc::ConfigError, "PlantModel: H_" + std::to_string(i) + " column mismatch");
    if (s.r.rows() != s.h.rows() || s.r.cols() != s.h.rows()) {
      raise(Errc::ConfigError, "PlantModel: R_" + std::to_string(i) + " dimension mismatch");
    }
    r_chols_.push_back(lower_cholesky(s.r, "PlantModel: R_i"));
    total_meas_dim_ += static_cast<int>(s.h.rows());
  }
  if (!is_observable(f_, stacked_h())) {
    raise(Errc::NotObservable, "PlantModel: stacked (F, H)");
  }
}

Eigen::MatrixXd PlantModel::stacked_h() const {
  Eigen::MatrixXd h(total_meas_dim_, state_dim());
  Eigen::Index row = 0;
  for (const Sensor& s : sensors_) {
    h.middleRows(row, s.h.rows()) = s.h;
    row += s.h.rows();
  }
  return h;
}

Eigen::MatrixXd PlantModel::stacked_r() const {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(total_meas_dim_, total_meas_dim_);
  Eigen::Index at = 0;
  for (const Sensor& s : sensors_) {
    r.block(at, at, s.r.rows(), s.r.cols()) = s.r;
    at += s.r.rows();
  }
  return r;
}

Eigen::MatrixXd PlantModel::sensor_information(int i) const {
  const Sensor& s = sensor(i);
  return symmetrize(s.h.transpose() * spd_inverse(s.r, "sensor_information") * s.h);
}

Eigen::MatrixXd PlantModel::information_rate() const {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(state_dim(), state_dim());
  for (int i = 0; i < sensor_count(); ++i) theta += sensor_information(i);
  return symmetrize(theta);
}

Eigen::VectorXd sample_initial(const Eigen::VectorXd& mean, const Eigen::MatrixXd& p0, Rng& rng) {
  return mean + lower_cholesky(p0, "sample_initial: P0") * rng.normal_vector(mean.size());
}

Eigen::VectorXd step_truth(const Eigen::VectorXd& x, const PlantModel& model, Rng& rng) {
  return model.f() * x + model.q_chol() * rng.normal_vector(x.size());
}

std::vector<Eigen::VectorXd> measure(const Eigen::VectorXd& x, const PlantModel& model,
                                     std::span<Rng> sensor_rngs) {
  if (static_cast<int>(sensor_rngs.size()) != model.sensor_count()) {
    raise(Errc::ConfigError, "measure: need one rng stream per sensor");
  }
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(sensor_rngs.size());
  for (int i = 0; i < model.sensor_count(); ++i) {
    const Sensor& s = model.sensor(i);
    ys.push_back(s.h * x + model.r_chol(i) * sensor_rngs[static_cast<std::size_t>(i)].normal_vector(s.h.rows()));
  }
  return ys;
}

std::vector<Eigen::MatrixXd> random_sensor_suite(const Eigen::MatrixXd& f, int sensor_count,
                                                 int meas_dim, std::uint64_t seed) {
  const Eigen::Index n = f.rows();
  Rng rng = Rng::stream(seed, "sensor_suite");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Eigen::MatrixXd> hs;
    hs.reserve(static_cast<std::size_t>(sensor_count));
    Eigen::MatrixXd stacked(sensor_count * meas_dim, n);
    for (int i = 0; i < sensor_count; ++i) {
      Eigen::MatrixXd h(meas_dim, n);
      for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c)
          h(r, c) = static_cast<double>(static_cast<long long>(rng.uniform_int(3)) - 1);
      stacked.middleRows(i * meas_dim, meas_dim) = h;
      hs.push_back(std::move(h));
    }
    if (is_observable(f, stacked)) return hs;
  }
  raise(Errc::ObservabilityUnreachable, "random_sensor_suite: 1000 rejections");
}

TruthTrajectory simulate_trajectory(const PlantModel& model, const Eigen::VectorXd& x0_mean,
                                    const Eigen::MatrixXd& p0, int horizon,
                                    std::uint64_t master_seed, std::uint64_t trial) {
  TruthTrajectory traj;
  traj.master_seed = master_seed;
  traj.trial = trial;
  Rng truth = Rng::stream(master_seed, "truth", trial);
  std::vector<Rng> sensor_rngs;
  sensor_rngs.reserve(static_cast<std::size_t>(model.sensor_count()));
  for (int i = 0; i < model.sensor_count(); ++i) {
    sensor_rngs.push_back(Rng::stream(master_seed, "sensor", trial, static_cast<std::uint64_t>(i)));
  }

  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.measurements.reserve(static_cast<std::size_t>(horizon));
  traj.states.push_back(sample_initial(x0_mean, p0, truth));
  for (int k = 1; k <= horizon; ++k) {
    traj.states.push_back(step_truth(traj.states.back(), model, truth));
    traj.measurements.push_back(measure(traj.states.back(), model, sensor_rngs));
  }
  return traj;
}

}  // namespace dkflab
