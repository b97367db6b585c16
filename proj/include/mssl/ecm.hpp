#ifndef MSSL_ECM_HPP_
#define MSSL_ECM_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mssl/model.hpp"
#include "mssl/prior.hpp"
#include "mssl/scalar_update.hpp"

namespace mssl {

// One rung of a spike-rate ladder.
struct SpikeRates {
  double lambda0 = 0.0;
  double xi0 = 0.0;
};

enum class OmegaStructure {
  kFull,      // joint mSSL
  kDiagonal,  // off-diagonals pinned at zero: separate per-response SSL
};

enum class ResidualMode {
  kIncremental,  // residual updated in place after each coordinate move
  kExact,        // residual recomputed from Y - X B before every coordinate
};

struct SolverConfig {
  double tol = 1e-6;
  int max_outer_iters = 200;
  int max_inner_sweeps = 1;
  double tau = Hyperparameters::kDefaultTau;  // the solver's floor; overrides hp.tau()
  std::optional<Matrix> init_B;      // default: zeros
  std::optional<Matrix> init_Omega;  // default: identity
  std::vector<SpikeRates> ladder;    // empty: single fit at hp's spike rates
  OmegaStructure structure = OmegaStructure::kFull;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("SolverConfig: tol must be positive");
    if (max_outer_iters < 1 || max_inner_sweeps < 1)
      throw InvalidArgument("SolverConfig: iteration limits must be at least 1");
    if (!(tau > 0.0)) throw InvalidArgument("SolverConfig: tau must be positive");
    for (std::size_t i = 1; i < ladder.size(); ++i)
      if (!(ladder[i].lambda0 > ladder[i - 1].lambda0 && ladder[i].xi0 > ladder[i - 1].xi0))
        throw InvalidArgument("SolverConfig: ladder must be strictly increasing in both rates");
  }
};

struct FitResult {
  ModelEstimate estimate;
  std::vector<double> objective_trajectory;
  int n_outer_iters = 0;
  bool converged = false;
  bool floor_projection_applied = false;
  Index eff_dim_B = 0;
  Index eff_dim_Omega = 0;
};

// Raised when the objective stops being finite; carries the offending iterate.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, ModelEstimate iterate, int iteration)
      : std::runtime_error(what), iterate_(std::move(iterate)), iteration_(iteration) {}
  const ModelEstimate& iterate() const noexcept { return iterate_; }
  int iteration() const noexcept { return iteration_; }

 private:
  ModelEstimate iterate_;
  int iteration_;
};

// Log posterior up to the truncated prior's normalizer: -inf whenever
// min-eig(Omega) <= tau.
inline double penalized_objective(const Dataset& data, const ModelEstimate& est,
                                  const Hyperparameters& hp) {
  detail::check_estimate_shape(data.X(), data.q(), est, "penalized_objective");
  const double prior_omega = log_prior_Omega_truncated(est.Omega, hp.omega_prior(), hp.tau());
  if (std::isinf(prior_omega)) return prior_omega;
  return log_likelihood(data, est) + log_prior_B(est.B, hp.beta_prior()) + prior_omega;
}

// The same sum without the tau indicator. This is the quantity the ECM
// iterations increase.
inline double untruncated_objective(const Dataset& data, const ModelEstimate& est,
                                    const Hyperparameters& hp) {
  return log_likelihood(data, est) + log_prior_B(est.B, hp.beta_prior()) +
         log_prior_Omega_untruncated(est.Omega, hp.omega_prior());
}

namespace detail {

inline Matrix m_step_B_with_prior(const Dataset& data, const Matrix& omega, Matrix b,
                                  const SpikeSlabParams& prm, int sweeps,
                                  ResidualMode mode) {
  const Index p = data.p(), q = data.q();
  if (omega.rows() != q || omega.cols() != q) throw DimensionError("m_step_B: Omega shape");
  if (b.rows() != p || b.cols() != q) throw DimensionError("m_step_B: B shape");
  if (p == 0) return b;
  const Matrix& x = data.X();
  const Vector col_sq = x.colwise().squaredNorm().transpose();
  Matrix resid = data.Y() - x * b;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      Eigen::RowVectorXd xr = x.col(j).transpose() * resid;  // x_j^T R
      for (Index k = 0; k < q; ++k) {
        if (mode == ResidualMode::kExact) {
          resid = data.Y() - x * b;
          xr = x.col(j).transpose() * resid;
        }
        const double curvature = omega(k, k) * col_sq(j);
        const double linear = xr.dot(omega.col(k)) + curvature * b(j, k);
        const double updated = maximize_scalar(curvature, linear, prm);
        const double step = updated - b(j, k);
        if (step == 0.0) continue;
        b(j, k) = updated;
        if (mode == ResidualMode::kIncremental) {
          resid.col(k).noalias() -= step * x.col(j);
          xr(k) -= step * col_sq(j);
        }
      }
    }
  }
  return b;
}

// Column-block coordinate ascent on
//   h(Omega) = n/2 log|Omega| - n/2 tr(S Omega) - xi1 sum_k w_kk
//              + sum_{k<k'} log_mixture_density(w_kk').
// With column k partitioned as (w12, w22) and gamma = w22 - w12' W11^{-1} w12,
// h separates into (n/2) log gamma - (n S_kk / 2 + xi1) gamma, maximized at
// gamma = n / (n S_kk + 2 xi1), plus a penalized quadratic in w12 that is
// solved by exact scalar maximization per coordinate. gamma > 0 keeps every
// iterate positive definite.
inline Matrix omega_sweeps(const Matrix& s, double n, Matrix omega, const SpikeSlabParams& prm,
                           int sweeps, OmegaStructure structure) {
  constexpr int kInnerPasses = 100;
  constexpr double kInnerTol = 1e-13;
  const Index q = s.rows();
  const double xi1 = prm.rate_slab;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Index k = 0; k < q; ++k) {
      const double c = n * s(k, k) + 2.0 * xi1;
      const double gamma = n / c;
      if (q == 1 || structure == OmegaStructure::kDiagonal) {
        omega.row(k).setZero();
        omega.col(k).setZero();
        omega(k, k) = gamma;
        continue;
      }
      std::vector<Index> others;
      others.reserve(static_cast<std::size_t>(q - 1));
      for (Index i = 0; i < q; ++i)
        if (i != k) others.push_back(i);
      const Index m = q - 1;
      Matrix w11(m, m);
      Vector w12(m), s12(m);
      for (Index a = 0; a < m; ++a) {
        w12(a) = omega(others[a], k);
        s12(a) = s(others[a], k);
        for (Index bb = 0; bb < m; ++bb) w11(a, bb) = omega(others[a], others[bb]);
      }
      const Matrix a_inv = symmetrized(spd_inverse(w11, "m_step_Omega: Omega block"));
      Vector aw = a_inv * w12;
      for (int pass = 0; pass < kInnerPasses; ++pass) {
        double max_step = 0.0;
        for (Index a = 0; a < m; ++a) {
          const double curvature = c * a_inv(a, a);
          const double linear = -n * s12(a) - c * (aw(a) - a_inv(a, a) * w12(a));
          const double updated = maximize_scalar(curvature, linear, prm);
          const double step = updated - w12(a);
          if (step == 0.0) continue;
          w12(a) = updated;
          aw += step * a_inv.col(a);
          max_step = std::max(max_step, std::abs(step));
        }
        if (max_step <= kInnerTol) break;
      }
      for (Index a = 0; a < m; ++a) {
        omega(others[a], k) = w12(a);
        omega(k, others[a]) = w12(a);
      }
      omega(k, k) = gamma + w12.dot(a_inv * w12);
    }
  }
  return omega;
}

inline void check_residual_covariance(const Matrix& s) {
  require_symmetric(s, "m_step_Omega: S", 1e-10);
  if (s.rows() > 0 && min_eigenvalue(s) < -1e-10)
    throw InvalidArgument("m_step_Omega: S is not positive semidefinite");
}

}  // namespace detail

// Cyclic coordinate maximization over B in row-major (j, k) order with Omega
// fixed. Each coordinate is set to the exact maximizer of the conditional
// objective, so the penalized objective never decreases.
inline Matrix m_step_B(const Dataset& data, const Matrix& omega, const Matrix& b_init,
                       const Hyperparameters& hp, int sweeps,
                       ResidualMode mode = ResidualMode::kIncremental) {
  return detail::m_step_B_with_prior(data, omega, b_init, hp.beta_prior(), sweeps, mode);
}

struct OmegaStepResult {
  Matrix Omega;
  bool floor_projection_applied = false;
};

// Penalized log-det update of Omega given the residual covariance
// S = (Y - X B)^T (Y - X B) / n. A final eigenvalue-floor projection to tau is
// applied only if the ascent iterate violates it.
inline OmegaStepResult m_step_Omega(const Matrix& s, Index n, const Matrix& omega_init,
                                    const Hyperparameters& hp, int sweeps,
                                    OmegaStructure structure = OmegaStructure::kFull) {
  detail::check_residual_covariance(s);
  if (omega_init.rows() != s.rows() || omega_init.cols() != s.cols())
    throw DimensionError("m_step_Omega: Omega_init shape");
  if (n < 1) throw InvalidArgument("m_step_Omega: n must be at least 1");
  cholesky(omega_init, "m_step_Omega: Omega_init");
  OmegaStepResult out;
  out.Omega = symmetrized(detail::omega_sweeps(s, static_cast<double>(n), omega_init,
                                               hp.omega_prior(), sweeps, structure));
  if (min_eigenvalue(out.Omega) < hp.tau()) {
    out.Omega = project_eigen_floor(out.Omega, hp.tau());
    out.floor_projection_applied = true;
  }
  return out;
}

namespace detail {

// max |new - old| / max(1, max |old|) over both parameter blocks.
inline double relative_change(const ModelEstimate& prev, const ModelEstimate& next) {
  double diff = 0.0, scale = 1.0;
  if (prev.B.size() > 0) {
    diff = (next.B - prev.B).cwiseAbs().maxCoeff();
    scale = std::max(scale, prev.B.cwiseAbs().maxCoeff());
  }
  diff = std::max(diff, (next.Omega - prev.Omega).cwiseAbs().maxCoeff());
  scale = std::max(scale, prev.Omega.cwiseAbs().maxCoeff());
  return diff / scale;
}

inline Matrix residual_covariance(const Dataset& data, const Matrix& b) {
  const Matrix resid = data.Y() - data.X() * b;
  return symmetrized(resid.transpose() * resid / static_cast<double>(data.n()));
}

}  // namespace detail

// MAP estimate of (B, Omega) by ECM: alternate the B coordinate sweep and the
// Omega block update until the relative parameter change drops below tol.
//
// With a ladder, the fit is repeated for each (lambda0, xi0) rung, warm
// started from the previous rung; the returned trajectory and effective
// dimensions belong to the last rung. The tau floor is enforced once, by a
// terminal projection.
inline FitResult fit(const Dataset& data, const Hyperparameters& hp, const SolverConfig& config) {
  config.validate();
  const Index p = data.p(), q = data.q();
  const Hyperparameters base(hp.beta_prior(), hp.omega_prior(), config.tau);

  ModelEstimate est;
  est.B = config.init_B.value_or(Matrix::Zero(p, q));
  est.Omega = config.init_Omega.value_or(Matrix::Identity(q, q));
  if (est.B.rows() != p || est.B.cols() != q) throw DimensionError("fit: init_B shape");
  if (est.Omega.rows() != q || est.Omega.cols() != q) throw DimensionError("fit: init_Omega shape");
  require_symmetric(est.Omega, "fit: init_Omega");
  cholesky(est.Omega, "fit: init_Omega");
  if (config.structure == OmegaStructure::kDiagonal)
    est.Omega = Matrix(est.Omega.diagonal().asDiagonal());

  std::vector<Hyperparameters> rungs;
  if (config.ladder.empty()) {
    rungs.push_back(base);
  } else {
    for (const auto& r : config.ladder) rungs.push_back(base.with_spike_rates(r.lambda0, r.xi0));
  }

  FitResult result;
  const double n = static_cast<double>(data.n());
  for (const auto& rung : rungs) {
    result.objective_trajectory.clear();
    result.converged = false;
    for (int it = 1; it <= config.max_outer_iters; ++it) {
      ModelEstimate next;
      next.B = m_step_B(data, est.Omega, est.B, rung, config.max_inner_sweeps);
      const Matrix s = detail::residual_covariance(data, next.B);
      next.Omega = symmetrized(detail::omega_sweeps(s, n, est.Omega, rung.omega_prior(),
                                                    config.max_inner_sweeps, config.structure));
      double objective;
      try {
        objective = untruncated_objective(data, next, rung);
      } catch (const NotPositiveDefinite&) {
        objective = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(objective))
        throw FitError("fit: non-finite objective at outer iteration " + std::to_string(it),
                       next, it);
      result.objective_trajectory.push_back(objective);
      ++result.n_outer_iters;
      const double change = detail::relative_change(est, next);
      est = std::move(next);
      if (change < config.tol) {
        result.converged = true;
        break;
      }
    }
  }

  const Hyperparameters& last = rungs.back();
  if (min_eigenvalue(est.Omega) < last.tau()) {
    est.Omega = project_eigen_floor(est.Omega, last.tau());
    result.floor_projection_applied = true;
  }
  result.eff_dim_B = effective_dimension(est.B, last.delta_beta());
  result.eff_dim_Omega =
      effective_dimension(est.Omega, last.delta_omega(), DimensionMode::kOffDiagonal);
  result.estimate = std::move(est);
  return result;
}

}  // namespace mssl

#endif  // MSSL_ECM_HPP_
