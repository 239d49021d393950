#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dkflab/model.hpp"

namespace dkflab {

/// Posterior/predictive pair of the centralized filter. Covariances are kept
/// symmetric; corrections are computed in information form (stabler when the
/// stacked measurement dimension dominates), with the innovation form kept
/// as an independent cross-check route.
struct CkfState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd p;
  Eigen::VectorXd x_pred;
  Eigen::MatrixXd p_pred;
};

struct InfoState {
  Eigen::MatrixXd omega;       // P⁻¹
  Eigen::MatrixXd omega_pred;  // P_pred⁻¹
};

CkfState ckf_init(const Eigen::VectorXd& x0_hat, const Eigen::MatrixXd& p0);

/// x_pred = F x̂, P_pred = F P Fᵀ + Q.
CkfState ckf_predict(const CkfState& state, const PlantModel& model);

/// Information-form correction with the stacked measurement vector y.
CkfState ckf_correct(const CkfState& state, const Eigen::VectorXd& y, const PlantModel& model);

/// Innovation-form correction: P = P_pred - P_pred Hᵀ(H P_pred Hᵀ + R̄)⁻¹ H P_pred.
/// Same contract as ckf_correct; kept as the second algebraic route.
CkfState ckf_correct_innovation(const CkfState& state, const Eigen::VectorXd& y,
                                const PlantModel& model);

/// Ω = Ω_pred + Hᵀ R̄⁻¹ H.
InfoState info_correct(const InfoState& info, const PlantModel& model);

/// Same additive update with the information rate supplied directly.
InfoState info_correct(const InfoState& info, const Eigen::MatrixXd& information_rate);

/// Full predict/correct loop over a trajectory; states[k] is the filter
/// state after consuming y_k (states[0] is the initial pair).
std::vector<CkfState> run_ckf(const PlantModel& model, const TruthTrajectory& trajectory,
                              const Eigen::VectorXd& x0_hat, const Eigen::MatrixXd& p0);

}  // namespace dkflab
