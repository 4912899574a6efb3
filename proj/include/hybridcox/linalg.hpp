#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "hybridcox/error.hpp"

namespace hybridcox::linalg {

/// Smallest eigenvalue of the correlation-scaled form of a symmetric PSD
/// matrix. Zero diagonal entries yield 0. Scale-free, so it measures
/// collinearity rather than covariate units.
inline double scaled_min_eigenvalue(const Eigen::MatrixXd& a) {
  const Eigen::Index p = a.rows();
  if (p == 0) return 1.0;
  Eigen::VectorXd d(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(a(j, j) > 0.0)) return 0.0;
    d(j) = 1.0 / std::sqrt(a(j, j));
  }
  const Eigen::MatrixXd scaled = d.asDiagonal() * a * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_rank_deficient(const Eigen::MatrixXd& information, double tol = 1e-10) {
  return scaled_min_eigenvalue(information) < tol;
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const std::string& what) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || is_rank_deficient(a)) {
    throw RankDeficiencyError(what + ": matrix is singular or not positive definite");
  }
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

/// Symmetric square root V^{1/2} of a PSD matrix. Eigenvalues below
/// -tol * max|eigenvalue| are reported as a factorization failure.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& v, double tol = 1e-10) {
  if (v.size() == 0) return v;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(v));
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const Eigen::VectorXd& lambda = es.eigenvalues();
  const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
  if (lambda.minCoeff() < -tol * scale) {
    throw NumericalError("covariance is not positive semi-definite");
  }
  const Eigen::VectorXd root = lambda.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline bool is_symmetric_psd(const Eigen::MatrixXd& v, double tol = 1e-9) {
  if (v.rows() != v.cols()) return false;
  if (v.size() == 0) return true;
  const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
  if ((v - v.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(v), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

/// Smallest generalized eigenvalue of (a, b): min over x of x'ax / x'bx.
/// Used to detect curvature collapse relative to a reference point.
inline double min_generalized_eigenvalue(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a), symmetrize(b),
                                                               Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return 0.0;
  return es.eigenvalues().minCoeff();
}

}  // namespace hybridcox::linalg
