#include "dkflab/ckf.hpp"

#include "dkflab/matrixtools.hpp"

namespace dkflab {

CkfState ckf_init(const Eigen::VectorXd& x0_hat, const Eigen::MatrixXd& p0) {
  if (!is_positive_definite(p0)) raise(Errc::NotPositiveDefinite, "ckf_init: P0");
  CkfState s;
  s.x_hat = x0_hat;
  s.p = symmetrize(p0);
  s.x_pred = s.x_hat;
  s.p_pred = s.p;
  return s;
}

CkfState ckf_predict(const CkfState& state, const PlantModel& model) {
  CkfState next = state;
  next.x_pred = model.f() * state.x_hat;
  next.p_pred = symmetrize(model.f() * state.p * model.f().transpose() + model.q());
  return next;
}

CkfState ckf_correct(const CkfState& state, const Eigen::VectorXd& y, const PlantModel& model) {
  const Eigen::MatrixXd h = model.stacked_h();
  const Eigen::MatrixXd r_inv = spd_inverse(model.stacked_r(), "ckf_correct: R");
  const Eigen::MatrixXd omega_pred = spd_inverse(state.p_pred, "ckf_correct: P_pred");

  CkfState next = state;
  next.p = spd_inverse(omega_pred + h.transpose() * r_inv * h, "ckf_correct: omega");
  const Eigen::MatrixXd gain = next.p * h.transpose() * r_inv;
  next.x_hat = state.x_pred + gain * (y - h * state.x_pred);
  return next;
}

CkfState ckf_correct_innovation(const CkfState& state, const Eigen::VectorXd& y,
                                const PlantModel& model) {
  const Eigen::MatrixXd h = model.stacked_h();
  const Eigen::MatrixXd s =
      symmetrize(h * state.p_pred * h.transpose() + model.stacked_r());
  const Eigen::MatrixXd s_inv = spd_inverse(s, "ckf_correct_innovation: innovation");
  const Eigen::MatrixXd gain = state.p_pred * h.transpose() * s_inv;

  CkfState next = state;
  next.x_hat = state.x_pred + gain * (y - h * state.x_pred);
  next.p = symmetrize(state.p_pred - gain * h * state.p_pred);
  return next;
}

InfoState info_correct(const InfoState& info, const PlantModel& model) {
  return info_correct(info, model.information_rate());
}

InfoState info_correct(const InfoState& info, const Eigen::MatrixXd& information_rate) {
  InfoState next = info;
  next.omega = symmetrize(info.omega_pred + information_rate);
  return next;
}

std::vector<CkfState> run_ckf(const PlantModel& model, const TruthTrajectory& trajectory,
                              const Eigen::VectorXd& x0_hat, const Eigen::MatrixXd& p0) {
  std::vector<CkfState> states;
  states.reserve(trajectory.measurements.size() + 1);
  states.push_back(ckf_init(x0_hat, p0));
  Eigen::VectorXd y(model.total_meas_dim());
  for (const auto& per_sensor : trajectory.measurements) {
    Eigen::Index at = 0;
    for (const auto& yi : per_sensor) {
      y.segment(at, yi.size()) = yi;
      at += yi.size();
    }
    CkfState s = ckf_predict(states.back(), model);
    states.push_back(ckf_correct(s, y, model));
  }
  return states;
}

}  // namespace dkflab
