#ifndef MSSL_PRIOR_HPP_
#define MSSL_PRIOR_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mssl/linalg.hpp"

namespace mssl {

// Two-component Laplace mixture: with probability mix_weight a slab
// Laplace(rate_slab), otherwise a spike Laplace(rate_spike).
struct SpikeSlabParams {
  double rate_spike = 1.0;  // lambda0 / xi0
  double rate_slab = 1.0;   // lambda1 / xi1
  double mix_weight = 0.5;  // theta / eta

  void validate(const char* who = "SpikeSlabParams") const {
    if (!(rate_slab > 0.0) || !(rate_spike > rate_slab) || !std::isfinite(rate_spike))
      throw InvalidArgument(std::string(who) + ": need rate_spike > rate_slab > 0");
    if (!(mix_weight > 0.0 && mix_weight < 1.0))
      throw InvalidArgument(std::string(who) + ": mix_weight must lie in (0, 1)");
  }
};

// Log of the mixture density at x, evaluated with log-sum-exp.
inline double log_mixture_density(double x, const SpikeSlabParams& prm) {
  const double ax = std::abs(x);
  const double slab = std::log(prm.mix_weight * prm.rate_slab / 2.0) - prm.rate_slab * ax;
  const double spike =
      std::log((1.0 - prm.mix_weight) * prm.rate_spike / 2.0) - prm.rate_spike * ax;
  const double hi = std::max(slab, spike);
  return hi + std::log1p(std::exp(std::min(slab, spike) - hi));
}

// Magnitude at which the weighted spike and slab densities are equal.
// Clamped at zero when the slab dominates everywhere.
inline double intersection_threshold(const SpikeSlabParams& prm) {
  if (!(prm.rate_spike > prm.rate_slab))
    throw InvalidArgument("intersection_threshold: need rate_spike > rate_slab");
  const double log_arg = std::log((1.0 - prm.mix_weight) / prm.mix_weight) +
                         std::log(prm.rate_spike / prm.rate_slab);
  return std::max(0.0, log_arg / (prm.rate_spike - prm.rate_slab));
}

namespace detail {

// Log-odds of slab membership at |x|, linear in |x|.
inline double slab_logit(double x, const SpikeSlabParams& prm) {
  return std::log(prm.mix_weight * prm.rate_slab) -
         std::log((1.0 - prm.mix_weight) * prm.rate_spike) +
         (prm.rate_spike - prm.rate_slab) * std::abs(x);
}

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

// Conditional probability that x was drawn from the slab.
inline double inclusion_probability(double x, const SpikeSlabParams& prm) {
  return detail::logistic(detail::slab_logit(x, prm));
}

// Mixture of the two rates weighted by inclusion_probability; equals the
// derivative of -log_mixture_density in |x|.
inline double adaptive_penalty(double x, const SpikeSlabParams& prm) {
  const double spike_prob = detail::logistic(-detail::slab_logit(x, prm));
  return prm.rate_slab + (prm.rate_spike - prm.rate_slab) * spike_prob;
}

// Exponents and proportionality constants of the theory schedules. Each
// "~" relation is realized as constant * rate.
struct TuningKnobs {
  double a_prime = 1.0;  // theta odds exponent: (pq)^(2 + a')
  double b_prime = 1.0;  // lambda0 exponent: max{n, pq}^(2 + b'), b' > 1/2
  double a_omega = 1.0;  // eta odds exponent: Q^(2 + a)
  double b_omega = 1.0;  // xi0 exponent: max{Q, n}^(4 + b)
  double c_theta_odds = 1.0;
  double c_lambda0 = 1.0;
  double c_lambda1 = 1.0;
  double c_eta_odds = 1.0;
  double c_xi0 = 1.0;
  double c_xi1 = 1.0;

  void validate() const {
    if (!(b_prime > 0.5)) throw InvalidArgument("TuningKnobs: b_prime must exceed 1/2");
    if (!(a_prime > 0.0) || !(a_omega > 0.0) || !(b_omega > 0.0))
      throw InvalidArgument("TuningKnobs: exponents must be positive");
    for (double c : {c_theta_odds, c_lambda0, c_lambda1, c_eta_odds, c_xi0, c_xi1})
      if (!(c > 0.0) || !std::isfinite(c))
        throw InvalidArgument("TuningKnobs: constants must be positive");
  }
};

// Spike-and-slab priors for B and Omega, the eigenvalue floor tau, and the
// derived intersection thresholds.
class Hyperparameters {
 public:
  static constexpr double kDefaultTau = 1e-3;

  Hyperparameters(SpikeSlabParams beta_prior, SpikeSlabParams omega_prior,
                  double tau = kDefaultTau)
      : beta_prior_(beta_prior), omega_prior_(omega_prior), tau_(tau) {
    beta_prior_.validate("beta_prior");
    omega_prior_.validate("omega_prior");
    if (!(tau_ > 0.0)) throw InvalidArgument("Hyperparameters: tau must be positive");
    delta_beta_ = intersection_threshold(beta_prior_);
    delta_omega_ = intersection_threshold(omega_prior_);
  }

  const SpikeSlabParams& beta_prior() const noexcept { return beta_prior_; }
  const SpikeSlabParams& omega_prior() const noexcept { return omega_prior_; }
  double tau() const noexcept { return tau_; }
  double delta_beta() const noexcept { return delta_beta_; }
  double delta_omega() const noexcept { return delta_omega_; }

  // Same slab rates and weights, new spike rates.
  Hyperparameters with_spike_rates(double lambda0, double xi0) const {
    SpikeSlabParams b = beta_prior_, o = omega_prior_;
    b.rate_spike = lambda0;
    o.rate_spike = xi0;
    return {b, o, tau_};
  }

 private:
  SpikeSlabParams beta_prior_;
  SpikeSlabParams omega_prior_;
  double tau_;
  double delta_beta_ = 0.0;
  double delta_omega_ = 0.0;
};

enum class Schedule : unsigned { kBeta = 1, kOmega = 2, kBoth = 3 };

constexpr bool requests(Schedule s, Schedule part) {
  return (static_cast<unsigned>(s) & static_cast<unsigned>(part)) != 0;
}

// Hyperparameters whose rates grow with (n, p, q) as the posterior
// contraction theory requires. A schedule that is not requested is still
// filled in (evaluated with its dimension count clamped to 1) so that the
// result is a valid Hyperparameters for degenerate p == 0 or q == 1 fits.
inline Hyperparameters theory_tuned_hyperparams(Index n, Index p, Index q,
                                                const TuningKnobs& knobs,
                                                double tau = Hyperparameters::kDefaultTau,
                                                Schedule which = Schedule::kBoth) {
  knobs.validate();
  if (n < 1) throw InvalidArgument("theory_tuned_hyperparams: n must be at least 1");
  const double nd = static_cast<double>(n);
  const double pq = static_cast<double>(p * q);
  const double big_q = static_cast<double>(q * (q - 1) / 2);
  if (requests(which, Schedule::kBeta) && !(p >= 1 && q >= 1))
    throw InvalidArgument("theory_tuned_hyperparams: B schedule needs p >= 1");
  if (requests(which, Schedule::kOmega) && q < 2)
    throw InvalidArgument("theory_tuned_hyperparams: Omega schedule needs q >= 2 (Q = 0)");

  const double pq_eff = std::max(pq, 1.0);
  const double q_eff = std::max(big_q, 1.0);

  SpikeSlabParams beta;
  beta.mix_weight = 1.0 / (1.0 + knobs.c_theta_odds * std::pow(pq_eff, 2.0 + knobs.a_prime));
  beta.rate_spike = knobs.c_lambda0 * std::pow(std::max(nd, pq_eff), 2.0 + knobs.b_prime);
  beta.rate_slab = knobs.c_lambda1 / nd;

  SpikeSlabParams omega;
  omega.mix_weight = 1.0 / (1.0 + knobs.c_eta_odds * std::pow(q_eff, 2.0 + knobs.a_omega));
  omega.rate_spike = knobs.c_xi0 * std::pow(std::max(q_eff, nd), 4.0 + knobs.b_omega);
  omega.rate_slab = knobs.c_xi1 / std::max(q_eff, nd);
  return {beta, omega, tau};
}

// Picks the schedules that make sense for the given dimensions.
inline Schedule schedule_for(Index p, Index q) {
  if (p == 0) return Schedule::kOmega;
  if (q < 2) return Schedule::kBeta;
  return Schedule::kBoth;
}

inline double log_prior_B(const Matrix& b, const SpikeSlabParams& prm) {
  double total = 0.0;
  for (Index k = 0; k < b.cols(); ++k)
    for (Index j = 0; j < b.rows(); ++j) total += log_mixture_density(b(j, k), prm);
  return total;
}

// Untruncated Omega log prior: mixture on each k < k' pair plus an
// Exponential(xi1) term on each diagonal entry.
inline double log_prior_Omega_untruncated(const Matrix& omega, const SpikeSlabParams& prm) {
  if (omega.rows() != omega.cols())
    throw DimensionError("log_prior_Omega_untruncated: Omega must be square");
  double total = 0.0;
  for (Index k = 0; k < omega.rows(); ++k) {
    if (omega(k, k) < 0.0)
      throw InvalidArgument("log_prior_Omega_untruncated: negative diagonal entry");
    total += std::log(prm.rate_slab) - prm.rate_slab * omega(k, k);
    for (Index kk = k + 1; kk < omega.cols(); ++kk)
      total += log_mixture_density(omega(k, kk), prm);
  }
  return total;
}

// Truncated prior up to its (never evaluated) normalizing constant: -inf
// unless min-eig(Omega) > tau.
inline double log_prior_Omega_truncated(const Matrix& omega, const SpikeSlabParams& prm,
                                        double tau) {
  if (omega.rows() != omega.cols())
    throw DimensionError("log_prior_Omega_truncated: Omega must be square");
  if (!(min_eigenvalue(symmetrized(omega)) > tau))
    return -std::numeric_limits<double>::infinity();
  return log_prior_Omega_untruncated(omega, prm);
}

enum class DimensionMode { kAllEntries, kOffDiagonal };

// Number of entries with |entry| > delta. kOffDiagonal counts the pairs
// k < k' of a square matrix.
inline Index effective_dimension(const Matrix& m, double delta,
                                 DimensionMode mode = DimensionMode::kAllEntries) {
  Index count = 0;
  if (mode == DimensionMode::kAllEntries) {
    for (Index k = 0; k < m.cols(); ++k)
      for (Index j = 0; j < m.rows(); ++j) count += std::abs(m(j, k)) > delta;
    return count;
  }
  if (m.rows() != m.cols())
    throw DimensionError("effective_dimension: off-diagonal mode needs a square matrix");
  for (Index k = 0; k < m.rows(); ++k)
    for (Index kk = k + 1; kk < m.cols(); ++kk) count += std::abs(m(k, kk)) > delta;
  return count;
}

}  // namespace mssl

#endif  // MSSL_PRIOR_HPP_
