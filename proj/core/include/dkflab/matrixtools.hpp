#pragma once

#include <Eigen/Dense>

#include "dkflab/errors.hpp"

namespace dkflab {

/// (M + Mᵀ)/2. Applied after every covariance-producing inversion in the
/// repo to suppress asymmetry drift.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// Throws NotSymmetric when max|M − Mᵀ| exceeds 1e-12 · max|M|.
void require_symmetric(const Eigen::MatrixXd& m, const char* who);

/// Half-vectorization: row-major upper triangle,
/// (m11, m12, ..., m1n, m22, ..., mnn). Length n(n+1)/2.
Eigen::VectorXd vech(const Eigen::MatrixXd& m);

/// Inverse of vech. Throws BadLength when the input length is not triangular.
Eigen::MatrixXd invvech(const Eigen::VectorXd& v);

inline Eigen::Index vech_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// Frobenius-nearest positive semidefinite matrix: eigendecompose, clip
/// negative eigenvalues to zero, reassemble.
Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m);

/// Inverse via LDLT with positivity guard: throws NotPositiveDefinite when a
/// pivot falls below 1e-12 · trace/n.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* who = "spd_inverse");

/// True when the LDLT pivots of (the symmetric part of) m are all above the
/// positivity guard threshold.
bool is_positive_definite(const Eigen::MatrixXd& m);

/// Spectral radius max|eig| of a general real square matrix.
double schur_radius(const Eigen::MatrixXd& m);

/// Induced 2-norm (largest singular value).
double spectral_norm(const Eigen::MatrixXd& m);

struct DareSolution {
  Eigen::MatrixXd p_star;
  int iterations = 0;
  double residual = 0.0;  // ||P* - RHS(P*)||_F / ||P*||_F
};

/// Fixed-point Riccati iteration P <- F{P - PHᵀ(HPHᵀ+R̄)⁻¹HP}Fᵀ + Q started
/// from P = Q (or p0 when given), run until the relative Frobenius change
/// drops below tol. Requires Q > 0, R̄ > 0 and (F, H) observable.
DareSolution solve_dare(const Eigen::MatrixXd& f, const Eigen::MatrixXd& h,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r_bar,
                        double tol = 1e-13, int max_iter = 200000,
                        const Eigen::MatrixXd* p0 = nullptr);

/// Rank of the stacked observability matrix [H; HF; ...; HF^{n-1}] equals n,
/// decided on singular values with threshold 1e-8 · sigma_max.
bool is_observable(const Eigen::MatrixXd& f, const Eigen::MatrixXd& h);

}  // namespace dkflab
