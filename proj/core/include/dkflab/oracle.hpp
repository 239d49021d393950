#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dkflab/dkf.hpp"
#include "dkflab/graph.hpp"

namespace dkflab {

/// One correction-step consensus problem: per-node stacked data
/// z_i = [y_i; x_pred_i], 𝐇_i = [H_i; I], 𝐒_i = diag{R_i, N·P_pred_i} over a
/// connected graph. Every P_pred_i must be positive definite.
struct CorrectionProblem {
  SensorGraph graph;
  std::vector<Eigen::MatrixXd> h;       // m_i x n
  std::vector<Eigen::MatrixXd> r;       // m_i x m_i
  std::vector<Eigen::MatrixXd> p_pred;  // n x n
  std::vector<Eigen::VectorXd> x_pred;  // n
  std::vector<Eigen::VectorXd> y;       // m_i

  int node_count() const { return graph.node_count; }
  int state_dim() const { return static_cast<int>(p_pred.front().rows()); }
};

struct P1Solution {
  Eigen::VectorXd xi_dagger;    // consensus minimizer, R^n
  Eigen::VectorXd lambda_star;  // stacked multiplier, R^{Nn}; minimum-norm
};

/// Closed-form solution of the estimate consensus problem:
/// ξ† = ℋ⁻¹ Σ_i 𝐇_iᵀ𝐒_i⁻¹z_i, and λ* as the minimum-norm least-squares
/// solution of the saddle-point system (which pins the free consensus
/// component of the multiplier to zero).
P1Solution solve_p1(const CorrectionProblem& problem);

/// Residual norm of the saddle-point (KKT) system at (1⊗ξ, λ).
double saddle_residual(const CorrectionProblem& problem, const Eigen::VectorXd& xi_dagger,
                       const Eigen::VectorXd& lambda_star);

struct P2Solution {
  Eigen::VectorXd theta_dagger;  // vech(Θ†), Θ† = Σ H_iᵀR_i⁻¹H_i
  Eigen::VectorXd upsilon_star;  // stacked, R^{N·n(n+1)/2}; consensus part zero
};

/// Closed-form solution of the information-rate consensus problem.
P2Solution solve_p2(const std::vector<Sensor>& sensors, const SensorGraph& graph);

/// Matrices of the expected-error dynamics and their stability diagnostics.
/// xi_tilde shrinks to 0x0 for a single node (trivially stable).
struct ErrorDynamicsReport {
  Eigen::MatrixXd e_dagger;     // n x n
  Eigen::MatrixXd e_ddagger;    // n x Nn
  Eigen::MatrixXd e_xi_breve;   // Nn x Nn
  Eigen::MatrixXd xi_breve;     // Nn x Nn
  Eigen::MatrixXd xi_tilde;     // (N-1)n x (N-1)n
  double xi_tilde_norm = 0.0;   // ||Ξ̃||₂
  double top_left_block_norm = 0.0;  // ||[Ĕ^ξ(Ξ̆)^{l*}]_{1:n,1:n}||_F, zero in theory
  double rho_exi_xi = 0.0;      // spectral radius of Ĕ^ξ(Ξ̆)^{l*}
  double rho_error_dyn = 0.0;   // spectral radius of Ĕ^ξ(Ξ̆)^{l*}·F̄
};

ErrorDynamicsReport build_error_dynamics(const CorrectionProblem& problem, const DkfGains& gains,
                                         int l_star, const Eigen::MatrixXd& f);

}  // namespace dkflab
