#include "dkflab/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "dkflab/matrixtools.hpp"

namespace dkflab {
namespace {

struct NodeBlocks {
  std::vector<Eigen::MatrixXd> hs_h;  // 𝐇_iᵀ𝐒_i⁻¹𝐇_i = H_iᵀR_i⁻¹H_i + (1/N)P_i⁻¹
  std::vector<Eigen::VectorXd> hs_z;  // 𝐇_iᵀ𝐒_i⁻¹z_i
  std::vector<Eigen::MatrixXd> p_inv;
  Eigen::MatrixXd calligraphic_h;     // ℋ = Σ_i 𝐇_iᵀ𝐒_i⁻¹𝐇_i
};

NodeBlocks node_blocks(const CorrectionProblem& problem) {
  const int n_nodes = problem.node_count();
  const int n = problem.state_dim();
  NodeBlocks b;
  b.calligraphic_h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n_nodes; ++i) {
    const Eigen::MatrixXd r_inv = spd_inverse(problem.r[i], "solve_p1: R");
    const Eigen::MatrixXd p_inv = spd_inverse(problem.p_pred[i], "solve_p1: P_pred");
    const Eigen::MatrixXd block =
        symmetrize(problem.h[i].transpose() * r_inv * problem.h[i] + p_inv / n_nodes);
    b.hs_h.push_back(block);
    b.hs_z.push_back(problem.h[i].transpose() * r_inv * problem.y[i] +
                     p_inv / n_nodes * problem.x_pred[i]);
    b.p_inv.push_back(p_inv);
    b.calligraphic_h += block;
  }
  b.calligraphic_h = symmetrize(b.calligraphic_h);
  return b;
}

}  // namespace

P1Solution solve_p1(const CorrectionProblem& problem) {
  if (!is_connected(problem.graph)) raise(Errc::Disconnected, "solve_p1: graph");
  const int n_nodes = problem.node_count();
  const int n = problem.state_dim();
  const NodeBlocks b = node_blocks(problem);
  if (!is_positive_definite(b.calligraphic_h)) raise(Errc::SingularH, "solve_p1: calligraphic H");

  P1Solution sol;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (const auto& v : b.hs_z) rhs += v;
  sol.xi_dagger = spd_inverse(b.calligraphic_h, "solve_p1: calligraphic H") * rhs;

  // Dual feasibility row of the saddle system: 𝕃 λ = 𝐇̄ᵀ𝐒̄⁻¹(z − 𝐇̄·(1⊗ξ†)).
  // The minimum-norm least-squares solution zeroes the kernel component.
  Eigen::VectorXd g(n_nodes * n);
  for (int i = 0; i < n_nodes; ++i) {
    g.segment(i * n, n) = b.hs_z[i] - b.hs_h[i] * sol.xi_dagger;
  }
  const Eigen::MatrixXd big_l =
      Eigen::kroneckerProduct(problem.graph.laplacian, Eigen::MatrixXd::Identity(n, n));
  sol.lambda_star = big_l.completeOrthogonalDecomposition().solve(g);
  return sol;
}

double saddle_residual(const CorrectionProblem& problem, const Eigen::VectorXd& xi_dagger,
                       const Eigen::VectorXd& lambda_star) {
  const int n_nodes = problem.node_count();
  const int n = problem.state_dim();
  const NodeBlocks b = node_blocks(problem);
  const Eigen::MatrixXd big_l =
      Eigen::kroneckerProduct(problem.graph.laplacian, Eigen::MatrixXd::Identity(n, n));

  Eigen::VectorXd primal_row(n_nodes * n);
  Eigen::VectorXd consensus = Eigen::VectorXd::Zero(n_nodes * n);
  for (int i = 0; i < n_nodes; ++i) {
    primal_row.segment(i * n, n) = -(b.hs_z[i] - b.hs_h[i] * xi_dagger);
    consensus.segment(i * n, n) = xi_dagger;
  }
  primal_row += big_l * lambda_star;
  const Eigen::VectorXd dual_row = big_l * consensus;  // zero for exact consensus
  return std::sqrt(primal_row.squaredNorm() + dual_row.squaredNorm());
}

P2Solution solve_p2(const std::vector<Sensor>& sensors, const SensorGraph& graph) {
  if (!is_connected(graph)) raise(Errc::Disconnected, "solve_p2: graph");
  const int n_nodes = graph.node_count;
  const int n = static_cast<int>(sensors.front().h.cols());
  const Eigen::Index ncov = vech_size(n);

  std::vector<Eigen::VectorXd> omega;
  Eigen::MatrixXd theta_dagger_mat = Eigen::MatrixXd::Zero(n, n);
  for (const Sensor& s : sensors) {
    const Eigen::MatrixXd info =
        symmetrize(s.h.transpose() * spd_inverse(s.r, "solve_p2: R") * s.h);
    theta_dagger_mat += info;
    omega.push_back(vech(info));
  }

  P2Solution sol;
  sol.theta_dagger = vech(symmetrize(theta_dagger_mat));

  if (n_nodes == 1) {
    sol.upsilon_star = Eigen::VectorXd::Zero(ncov);
    return sol;
  }

  const SpectralData s = spectral(graph);
  const Eigen::MatrixXd w_hat =
      Eigen::kroneckerProduct(s.w, Eigen::MatrixXd::Identity(ncov, ncov));
  const Eigen::VectorXd lam_tilde = s.eigenvalues.tail(n_nodes - 1);

  Eigen::VectorXd rhs(n_nodes * ncov);
  for (int i = 0; i < n_nodes; ++i) {
    rhs.segment(i * ncov, ncov) = static_cast<double>(n_nodes) * omega[i] - sol.theta_dagger;
  }
  Eigen::VectorXd projected = w_hat.transpose() * rhs;
  for (int q = 0; q < n_nodes - 1; ++q) {
    projected.segment(q * ncov, ncov) /= lam_tilde[q];
  }
  sol.upsilon_star = w_hat * projected;
  return sol;
}

ErrorDynamicsReport build_error_dynamics(const CorrectionProblem& problem, const DkfGains& gains,
                                         int l_star, const Eigen::MatrixXd& f) {
  if (l_star < 1) raise(Errc::ConfigError, "build_error_dynamics: l_star must be >= 1");
  const int n_nodes = problem.node_count();
  const int n = problem.state_dim();
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);

  ErrorDynamicsReport report;
  if (n_nodes == 1) {
    // No consensus subspace: the xi-error block is empty and trivially stable.
    const NodeBlocks b = node_blocks(problem);
    report.e_dagger = spd_inverse(b.calligraphic_h, "build_error_dynamics") * b.p_inv[0] * f;
    report.e_ddagger = Eigen::MatrixXd::Zero(n, n);
    report.e_xi_breve = Eigen::MatrixXd::Zero(n, n);
    report.xi_breve = Eigen::MatrixXd::Zero(n, n);
    report.xi_tilde = Eigen::MatrixXd(0, 0);
    return report;
  }

  const SpectralData s = spectral(problem.graph);
  const NodeBlocks b = node_blocks(problem);

  Eigen::MatrixXd k_cons = Eigen::MatrixXd::Zero(n_nodes * n, n_nodes * n);
  Eigen::MatrixXd k_cons_inv = Eigen::MatrixXd::Zero(n_nodes * n, n_nodes * n);
  Eigen::MatrixXd a_k_dual = Eigen::MatrixXd::Zero(n_nodes * n, n_nodes * n);
  Eigen::MatrixXd p_bar_inv = Eigen::MatrixXd::Zero(n_nodes * n, n_nodes * n);
  for (int i = 0; i < n_nodes; ++i) {
    k_cons_inv.block(i * n, i * n, n, n) = b.hs_h[i];
    k_cons.block(i * n, i * n, n, n) = spd_inverse(b.hs_h[i], "build_error_dynamics: K_cons");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(problem.p_pred[i], Eigen::EigenvaluesOnly);
    const double k_dual =
        1.0 / (static_cast<double>(n_nodes) * es.eigenvalues().maxCoeff() + gains.epsilon[i]);
    a_k_dual.block(i * n, i * n, n, n) = gains.alpha_lambda[i] * k_dual * eye_n;
    p_bar_inv.block(i * n, i * n, n, n) = b.p_inv[i];
  }

  const Eigen::MatrixXd big_l = Eigen::kroneckerProduct(problem.graph.laplacian, eye_n);
  Eigen::MatrixXd u_full(n_nodes, n_nodes);
  u_full.col(0) = s.u;
  u_full.rightCols(n_nodes - 1) = s.w;
  const Eigen::MatrixXd big_u = Eigen::kroneckerProduct(u_full, eye_n);
  const Eigen::MatrixXd big_w = Eigen::kroneckerProduct(s.w, eye_n);
  const Eigen::MatrixXd lam_tilde = Eigen::kroneckerProduct(
      Eigen::MatrixXd(s.eigenvalues.tail(n_nodes - 1).asDiagonal()), eye_n);
  const Eigen::MatrixXd ones = Eigen::kroneckerProduct(Eigen::VectorXd::Ones(n_nodes), eye_n);

  const Eigen::MatrixXd h_inv = spd_inverse(b.calligraphic_h, "build_error_dynamics: H");

  const Eigen::MatrixXd xi_full =
      Eigen::MatrixXd::Identity(n_nodes * n, n_nodes * n) - k_cons * big_l * a_k_dual * big_l;
  report.xi_breve = big_u.transpose() * xi_full * big_u;
  report.xi_tilde = Eigen::MatrixXd::Identity((n_nodes - 1) * n, (n_nodes - 1) * n) -
                    big_w.transpose() * k_cons * big_w * lam_tilde * big_w.transpose() *
                        a_k_dual * big_w * lam_tilde;
  report.xi_tilde_norm = spectral_norm(report.xi_tilde);

  const Eigen::MatrixXd e_xi = Eigen::MatrixXd::Identity(n_nodes * n, n_nodes * n) -
                               ones * h_inv * ones.transpose() * k_cons_inv;
  report.e_xi_breve = big_u.transpose() * e_xi * big_u;
  // E† = ℋ⁻¹ 1ᵀ (1/N) P̄⁻¹ 1 F = ℋ⁻¹ (1/N) Σ_i P_i⁻¹ F
  Eigen::MatrixXd p_inv_sum = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p_inv : b.p_inv) p_inv_sum += p_inv;
  report.e_dagger = h_inv * (p_inv_sum / n_nodes) * f;
  const Eigen::MatrixXd f_bar =
      Eigen::kroneckerProduct(Eigen::MatrixXd::Identity(n_nodes, n_nodes), f);
  report.e_ddagger =
      h_inv * ones.transpose() * (p_bar_inv / n_nodes) * f_bar * big_u;

  Eigen::MatrixXd xi_breve_power = Eigen::MatrixXd::Identity(n_nodes * n, n_nodes * n);
  for (int p = 0; p < l_star; ++p) xi_breve_power = xi_breve_power * report.xi_breve;
  const Eigen::MatrixXd closed = report.e_xi_breve * xi_breve_power;
  report.top_left_block_norm = closed.topLeftCorner(n, n).norm();
  report.rho_exi_xi = schur_radius(closed);
  report.rho_error_dyn = schur_radius(closed * f_bar);
  return report;
}

}  // namespace dkflab
