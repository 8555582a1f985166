#include "dglm/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dglm {

double smallest_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix ensure_psd(const Matrix& cov, const std::string& context) {
  require_dims(cov.rows() == cov.cols(), context + ": covariance not square");
  Matrix sym = symmetrize(cov);

  // Quick accept: a successful Cholesky proves positive (semi)definiteness
  // without the cost of an eigendecomposition in hot filtering loops.
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return sym;

  const double lambda_min = smallest_eigenvalue(sym);
  if (lambda_min >= -kPsdTolerance) return sym;
  if (lambda_min < -kPsdHardLimit) {
    throw NumericalError(context + ": covariance indefinite, min eigenvalue " +
                         std::to_string(lambda_min));
  }
  double jitter = kPsdJitter;
  while (lambda_min + jitter < -kPsdTolerance) jitter *= 10.0;
  sym.diagonal().array() += jitter;
  return sym;
}

Matrix psd_cholesky(const Matrix& cov, const std::string& context) {
  require_dims(cov.rows() == cov.cols(), context + ": covariance not square");
  const Matrix sym = symmetrize(cov);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  for (double jitter = kPsdJitter; jitter <= 1e-6; jitter *= 10.0) {
    Matrix shifted = sym;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError(context + ": covariance factorization failed");
}

Matrix project_psd(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym));
  if (es.eigenvalues().minCoeff() >= 0.0) return symmetrize(sym);
  Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clipped.asDiagonal() *
                    es.eigenvectors().transpose());
}

}  // namespace dglm
