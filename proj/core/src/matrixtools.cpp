#include "dkflab/matrixtools.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace dkflab {

void require_symmetric(const Eigen::MatrixXd& m, const char* who) {
  if (m.rows() != m.cols()) raise(Errc::NotSymmetric, std::string(who) + ": matrix not square");
  const double scale = m.cwiseAbs().maxCoeff();
  const double skew = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (skew > 1e-12 * std::max(scale, 1e-300)) {
    raise(Errc::NotSymmetric, std::string(who) + ": max|M - M^T| = " + std::to_string(skew));
  }
}

Eigen::VectorXd vech(const Eigen::MatrixXd& m) {
  require_symmetric(m, "vech");
  const Eigen::Index n = m.rows();
  Eigen::VectorXd v(vech_size(n));
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) v[t++] = m(i, j);
  return v;
}

Eigen::MatrixXd invvech(const Eigen::VectorXd& v) {
  // length must be triangular: n(n+1)/2
  const double root = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const auto n = static_cast<Eigen::Index>(std::llround(root));
  if (n <= 0 || vech_size(n) != v.size()) {
    raise(Errc::BadLength, "invvech: length " + std::to_string(v.size()) + " is not triangular");
  }
  Eigen::MatrixXd m(n, n);
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      m(i, j) = v[t];
      m(j, i) = v[t];
      ++t;
    }
  return m;
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m) {
  require_symmetric(m, "psd_project");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

namespace {

Eigen::LDLT<Eigen::MatrixXd> guarded_ldlt(const Eigen::MatrixXd& m, const char* who) {
  const Eigen::Index n = m.rows();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrize(m));
  const double guard = 1e-12 * std::abs(m.trace()) / static_cast<double>(n);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= guard) {
    raise(Errc::NotPositiveDefinite, std::string(who) + ": pivot below guard");
  }
  return ldlt;
}

}  // namespace

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* who) {
  auto ldlt = guarded_ldlt(m, who);
  return symmetrize(ldlt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols())));
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrize(m));
  const double guard = 1e-12 * std::abs(m.trace()) / static_cast<double>(m.rows());
  return ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > guard;
}

double schur_radius(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()[0];
}

bool is_observable(const Eigen::MatrixXd& f, const Eigen::MatrixXd& h) {
  const Eigen::Index n = f.rows();
  Eigen::MatrixXd obs(h.rows() * n, n);
  Eigen::MatrixXd block = h;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * h.rows(), h.rows()) = block;
    block = block * f;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(obs);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return false;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-8 * sv[0]) ++rank;
  return rank == n;
}

DareSolution solve_dare(const Eigen::MatrixXd& f, const Eigen::MatrixXd& h,
                        const Eigen::MatrixXd& q, const Eigen::MatrixXd& r_bar, double tol,
                        int max_iter, const Eigen::MatrixXd* p0) {
  if (!is_positive_definite(q)) raise(Errc::NotPositiveDefinite, "solve_dare: Q");
  if (!is_positive_definite(r_bar)) raise(Errc::NotPositiveDefinite, "solve_dare: R");
  if (!is_observable(f, h)) raise(Errc::NotObservable, "solve_dare: (F, H)");

  auto step = [&](const Eigen::MatrixXd& p) {
    const Eigen::MatrixXd s = symmetrize(h * p * h.transpose() + r_bar);
    const Eigen::MatrixXd gain = p * h.transpose() * spd_inverse(s, "solve_dare: innovation");
    return symmetrize(f * (p - gain * h * p) * f.transpose() + q);
  };

  Eigen::MatrixXd p = p0 ? symmetrize(*p0) : q;
  DareSolution out;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd next = step(p);
    const double change = (next - p).norm() / std::max(next.norm(), 1e-300);
    p = next;
    if (change < tol) {
      if (!is_positive_definite(p)) raise(Errc::NotPositiveDefinite, "solve_dare: P*");
      out.p_star = p;
      out.iterations = it;
      out.residual = (p - step(p)).norm() / std::max(p.norm(), 1e-300);
      return out;
    }
  }
  raise(Errc::NoConvergence, "solve_dare: max_iter=" + std::to_string(max_iter));
}

}  // namespace dkflab
