#ifndef MSSL_MODEL_HPP_
#define MSSL_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "mssl/linalg.hpp"

namespace mssl {

// Observed design X (n x p) and responses Y (n x q). p == 0 is the
// graphical-model case with no covariates.
//
// The column convention is ||X_j||_2 == sqrt(n). Construct with
// Normalization::kRescale to enforce it, or kAsIs to keep externally supplied
// columns; columns_normalized() then reports whether the convention holds.
class Dataset {
 public:
  enum class Normalization { kRescale, kAsIs };

  static constexpr double kColumnNormTol = 1e-8;

  Dataset(Matrix x, Matrix y, Normalization mode = Normalization::kRescale)
      : x_(std::move(x)), y_(std::move(y)) {
    if (y_.rows() < 1) throw DimensionError("Dataset: n must be at least 1");
    if (y_.cols() < 1) throw DimensionError("Dataset: q must be at least 1");
    if (x_.rows() != y_.rows())
      throw DimensionError("Dataset: X and Y have different row counts");
    if (!x_.allFinite() || !y_.allFinite())
      throw InvalidArgument("Dataset: non-finite entries");
    if (mode == Normalization::kRescale) {
      const double target = std::sqrt(static_cast<double>(n()));
      for (Index j = 0; j < x_.cols(); ++j) {
        const double norm = x_.col(j).norm();
        if (!(norm > 0.0)) throw InvalidArgument("Dataset: column of X is all zeros");
        x_.col(j) *= target / norm;
      }
    }
    columns_normalized_ = check_columns();
  }

  const Matrix& X() const noexcept { return x_; }
  const Matrix& Y() const noexcept { return y_; }
  Index n() const noexcept { return y_.rows(); }
  Index p() const noexcept { return x_.cols(); }
  Index q() const noexcept { return y_.cols(); }
  bool columns_normalized() const noexcept { return columns_normalized_; }

 private:
  bool check_columns() const {
    const double target = std::sqrt(static_cast<double>(n()));
    for (Index j = 0; j < x_.cols(); ++j)
      if (std::abs(x_.col(j).norm() - target) > kColumnNormTol * target) return false;
    return true;
  }

  Matrix x_;
  Matrix y_;
  bool columns_normalized_ = false;
};

struct ModelEstimate {
  Matrix B;      // p x q
  Matrix Omega;  // q x q, symmetric
};

using IndexPair = std::pair<Index, Index>;

struct GroundTruth {
  Matrix B0;
  Matrix Omega0;
  std::vector<IndexPair> supportB;      // (j, k) with B0(j, k) != 0
  std::vector<IndexPair> supportOmega;  // (k, k') with k < k'
  Index s0B = 0;
  Index s0Omega = 0;
  double a1 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;

  ModelEstimate as_estimate() const { return {B0, Omega0}; }

  // Checks the A1/A2 bounds and that the recorded supports match the
  // matrices exactly. Throws InvalidArgument naming the first violation.
  void validate(double tol = 1e-10) const {
    require_symmetric(Omega0, "GroundTruth: Omega0");
    if (B0.cols() != Omega0.rows()) throw DimensionError("GroundTruth: B0/Omega0 shape");
    if (Omega0.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(Omega0, Eigen::EigenvaluesOnly);
      const auto& ev = es.eigenvalues();
      if (ev(0) < 1.0 / b2 - tol || ev(ev.size() - 1) > 1.0 / b1 + tol)
        throw InvalidArgument("GroundTruth: eigenvalues of Omega0 outside [1/b2, 1/b1]");
    }
    if (B0.size() > 0 && B0.cwiseAbs().maxCoeff() > a1)
      throw InvalidArgument("GroundTruth: |B0| exceeds a1");
    if (static_cast<Index>(supportB.size()) != s0B)
      throw InvalidArgument("GroundTruth: supportB size differs from s0B");
    if (static_cast<Index>(supportOmega.size()) != s0Omega)
      throw InvalidArgument("GroundTruth: supportOmega size differs from s0Omega");
    Index nnz_b = 0;
    for (Index j = 0; j < B0.rows(); ++j)
      for (Index k = 0; k < B0.cols(); ++k) nnz_b += B0(j, k) != 0.0;
    if (nnz_b != s0B) throw InvalidArgument("GroundTruth: B0 nonzero count differs from s0B");
    for (const auto& [j, k] : supportB)
      if (B0(j, k) == 0.0) throw InvalidArgument("GroundTruth: supportB entry is zero");
    Index nnz_o = 0;
    for (Index k = 0; k < Omega0.rows(); ++k)
      for (Index kk = k + 1; kk < Omega0.cols(); ++kk) nnz_o += Omega0(k, kk) != 0.0;
    if (nnz_o != s0Omega)
      throw InvalidArgument("GroundTruth: Omega0 off-diagonal count differs from s0Omega");
    for (const auto& [k, kk] : supportOmega)
      if (!(k < kk) || Omega0(k, kk) == 0.0)
        throw InvalidArgument("GroundTruth: bad supportOmega entry");
  }
};

namespace detail {

inline void check_estimate_shape(const Matrix& x, Index q, const ModelEstimate& est,
                                 const char* who) {
  if (est.Omega.rows() != q || est.Omega.cols() != q)
    throw DimensionError(std::string(who) + ": Omega must be q x q");
  if (est.B.rows() != x.cols() || est.B.cols() != q)
    throw DimensionError(std::string(who) + ": B must be p x q");
}

// tr(D^T X^T X D M) computed as sum((X D M) .* (X D)).
inline double design_quadratic(const Matrix& x, const Matrix& d, const Matrix& m) {
  const Matrix xd = x * d;
  return (xd * m).cwiseProduct(xd).sum();
}

}  // namespace detail

// Exact Gaussian log density of Y given X, B, Omega, including the
// -(nq/2) log(2 pi) constant.
inline double log_likelihood(const Dataset& data, const ModelEstimate& est) {
  detail::check_estimate_shape(data.X(), data.q(), est, "log_likelihood");
  const auto llt = cholesky(est.Omega, "log_likelihood: Omega");
  const double n = static_cast<double>(data.n());
  const double q = static_cast<double>(data.q());
  const Matrix resid = data.Y() - data.X() * est.B;
  const double quad = (resid * est.Omega).cwiseProduct(resid).sum();
  return 0.5 * n * log_det(llt) - 0.5 * quad - 0.5 * n * q * std::log(2.0 * std::numbers::pi);
}

// (1/n) K(f0, f) for the product of row densities.
inline double kl_divergence_per_obs(const Matrix& x, const GroundTruth& truth,
                                    const ModelEstimate& est) {
  const Index q = truth.Omega0.rows();
  detail::check_estimate_shape(x, q, est, "kl_divergence_per_obs");
  detail::check_estimate_shape(x, q, truth.as_estimate(), "kl_divergence_per_obs");
  const auto llt0 = cholesky(truth.Omega0, "kl_divergence_per_obs: Omega0");
  const auto llt = cholesky(est.Omega, "kl_divergence_per_obs: Omega");
  const Matrix sigma0_omega = llt0.solve(est.Omega);
  const double n = static_cast<double>(x.rows());
  const double mean_term = detail::design_quadratic(x, truth.B0 - est.B, est.Omega) / n;
  const double kl = 0.5 * (log_det(llt0) - log_det(llt) - static_cast<double>(q) +
                           sigma0_omega.trace() + mean_term);
  return std::max(0.0, kl);
}

// (1/n) V(f0, f): the variance of the log likelihood ratio under f0.
inline double kl_variance_per_obs(const Matrix& x, const GroundTruth& truth,
                                  const ModelEstimate& est) {
  const Index q = truth.Omega0.rows();
  detail::check_estimate_shape(x, q, est, "kl_variance_per_obs");
  detail::check_estimate_shape(x, q, truth.as_estimate(), "kl_variance_per_obs");
  const auto llt0 = cholesky(truth.Omega0, "kl_variance_per_obs: Omega0");
  cholesky(est.Omega, "kl_variance_per_obs: Omega");
  const Matrix sigma0_omega = llt0.solve(est.Omega);
  const double n = static_cast<double>(x.rows());
  const double cov_term = 0.5 * ((sigma0_omega * sigma0_omega).trace() -
                                 2.0 * sigma0_omega.trace() + static_cast<double>(q));
  const Matrix weight = est.Omega * sigma0_omega;  // Omega Omega0^{-1} Omega
  const double mean_term = detail::design_quadratic(x, est.B - truth.B0, weight) / n;
  return std::max(0.0, cov_term) + std::max(0.0, mean_term);
}

// (1/n) sum_i rho(f_i, f0_i), the per-observation negative log Hellinger
// affinity between the two Gaussian regression models.
inline double log_affinity_per_obs(const Matrix& x, const GroundTruth& truth,
                                   const ModelEstimate& est) {
  const Index q = truth.Omega0.rows();
  detail::check_estimate_shape(x, q, est, "log_affinity_per_obs");
  detail::check_estimate_shape(x, q, truth.as_estimate(), "log_affinity_per_obs");
  const auto llt0 = cholesky(truth.Omega0, "log_affinity_per_obs: Omega0");
  const auto llt = cholesky(est.Omega, "log_affinity_per_obs: Omega");
  const Matrix identity = Matrix::Identity(q, q);
  const Matrix sigma0 = llt0.solve(identity);
  const Matrix sigma = llt.solve(identity);
  const Matrix sigma_bar = symmetrized(0.5 * (sigma + sigma0));
  const auto llt_bar = cholesky(sigma_bar, "log_affinity_per_obs: average covariance");
  // log|Sigma| = -log|Omega|.
  const double det_term = 0.5 * log_det(llt_bar) + 0.25 * log_det(llt) + 0.25 * log_det(llt0);
  const double n = static_cast<double>(x.rows());
  const Matrix sigma_bar_inv = llt_bar.solve(identity);
  const double mean_term =
      detail::design_quadratic(x, est.B - truth.B0, sigma_bar_inv) / (8.0 * n);
  return std::max(0.0, det_term) + std::max(0.0, mean_term);
}

// Clamps every eigenvalue of a symmetric matrix below tau up to tau. A matrix
// that already satisfies the floor is returned unchanged.
inline Matrix project_eigen_floor(const Matrix& m, double tau) {
  require_symmetric(m, "project_eigen_floor: input", 1e-10);
  if (!(tau > 0.0)) throw InvalidArgument("project_eigen_floor: tau must be positive");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector ev = es.eigenvalues();
  if (ev(0) >= tau) return m;
  ev = ev.cwiseMax(tau);
  return symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace mssl

#endif  // MSSL_MODEL_HPP_
