#ifndef MSSL_LINALG_HPP_
#define MSSL_LINALG_HPP_

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "mssl/errors.hpp"

namespace mssl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Entrywise symmetry test with a tolerance scaled by the largest entry.
inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = j + 1; i < m.rows(); ++i)
      if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
  return true;
}

inline void require_symmetric(const Matrix& m, const std::string& what,
                              double tol = 1e-12) {
  if (m.rows() != m.cols())
    throw DimensionError(what + " must be square");
  if (!is_symmetric(m, tol)) throw InvalidArgument(what + " is not symmetric");
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Cholesky factor of a symmetric positive definite matrix; throws
// NotPositiveDefinite when the factorization breaks down.
inline Eigen::LLT<Matrix> cholesky(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) throw DimensionError(what + " must be square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(what);
  const auto diag = llt.matrixLLT().diagonal();
  for (Index i = 0; i < diag.size(); ++i)
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) throw NotPositiveDefinite(what);
  return llt;
}

inline double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline Matrix spd_inverse(const Matrix& m, const std::string& what) {
  return cholesky(m, what).solve(Matrix::Identity(m.rows(), m.cols()));
}

}  // namespace mssl

#endif  // MSSL_LINALG_HPP_
