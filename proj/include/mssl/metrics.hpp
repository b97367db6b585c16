#ifndef MSSL_METRICS_HPP_
#define MSSL_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/SVD>

#include "mssl/ecm.hpp"
#include "mssl/model.hpp"
#include "mssl/prior.hpp"

namespace mssl {

// sqrt(max{q, s0Omega, s0B} log(max{p, q}) / n).
inline double epsilon_n(Index n, Index p, Index q, Index s0B, Index s0Omega) {
  if (n < 1) throw InvalidArgument("epsilon_n: n must be at least 1");
  if (p < 0 || q < 0 || s0B < 0 || s0Omega < 0)
    throw InvalidArgument("epsilon_n: counts must be nonnegative");
  const Index dim = std::max(p, q);
  if (dim < 2) throw InvalidArgument("epsilon_n: max{p, q} must be at least 2");
  const Index s_star = std::max({q, s0Omega, s0B});
  return std::sqrt(static_cast<double>(s_star) * std::log(static_cast<double>(dim)) /
                   static_cast<double>(n));
}

struct RestrictedEigenvalue {
  double value = 0.0;
  bool exact = true;  // false: an upper bound from a greedy subset search
};

// phi^2(s): the infimum of ||X A||_F^2 / (n ||A||_F^2) over p x q matrices with
// at most s nonzero entries.
//
// The ratio is a weighted average of the per-column ratios of A, so the
// infimum is attained by a single column and equals the smallest eigenvalue of
// X_S^T X_S / n over column subsets |S| <= s. By eigenvalue interlacing only
// subsets of size min(s, p) matter. They are enumerated when there are at most
// max_subsets of them; otherwise a greedy search returns an upper bound.
inline RestrictedEigenvalue restricted_eigenvalue(const Matrix& x, Index s,
                                                  std::size_t max_subsets = 200000) {
  if (s < 1) throw InvalidArgument("restricted_eigenvalue: s must be at least 1");
  const Index p = x.cols();
  if (p < 1) throw InvalidArgument("restricted_eigenvalue: X has no columns");
  const Matrix gram = x.transpose() * x / static_cast<double>(x.rows());
  const Index k = std::min(s, p);

  auto subset_min_eig = [&](const std::vector<Index>& cols) {
    const Index m = static_cast<Index>(cols.size());
    Matrix sub(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b) sub(a, b) = gram(cols[a], cols[b]);
    return min_eigenvalue(sub);
  };

  // C(p, k) with early exit once it exceeds the budget.
  double count = 1.0;
  for (Index i = 0; i < k; ++i) count = count * static_cast<double>(p - i) / static_cast<double>(i + 1);

  RestrictedEigenvalue out;
  out.value = std::numeric_limits<double>::infinity();
  if (count <= static_cast<double>(max_subsets)) {
    std::vector<Index> cols(static_cast<std::size_t>(k));
    std::iota(cols.begin(), cols.end(), Index{0});
    while (true) {
      out.value = std::min(out.value, subset_min_eig(cols));
      Index i = k - 1;
      while (i >= 0 && cols[static_cast<std::size_t>(i)] == p - k + i) --i;
      if (i < 0) break;
      ++cols[static_cast<std::size_t>(i)];
      for (Index t = i + 1; t < k; ++t)
        cols[static_cast<std::size_t>(t)] = cols[static_cast<std::size_t>(t - 1)] + 1;
    }
    return out;
  }

  out.exact = false;
  for (Index start = 0; start < p; ++start) {
    std::vector<Index> cols{start};
    std::vector<bool> used(static_cast<std::size_t>(p), false);
    used[static_cast<std::size_t>(start)] = true;
    while (static_cast<Index>(cols.size()) < k) {
      double best = std::numeric_limits<double>::infinity();
      Index best_j = -1;
      for (Index j = 0; j < p; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        cols.push_back(j);
        const double v = subset_min_eig(cols);
        cols.pop_back();
        if (v < best) {
          best = v;
          best_j = j;
        }
      }
      cols.push_back(best_j);
      used[static_cast<std::size_t>(best_j)] = true;
    }
    out.value = std::min(out.value, subset_min_eig(cols));
  }
  return out;
}

// Psi = B Omega: the direct effect of each predictor on each outcome.
inline Matrix direct_effects(const ModelEstimate& est) {
  if (est.B.cols() != est.Omega.rows()) throw DimensionError("direct_effects: shape");
  return est.B * est.Omega;
}

struct ContractionRecord {
  double eps_n = 0.0;
  double xb_ratio = 0.0;     // ||X(B - B0)||_F^2 / (n eps^2)
  double omega_ratio = 0.0;  // ||Omega - Omega0||_F^2 / eps^2
  double b_ratio = 0.0;      // ||B - B0||_F^2 phi^2 / eps^2
  double psi_ratio = 0.0;    // ||B Omega - B0 Omega0||_F^2 min{1/|||B0|||_2^2, phi^2} / eps^2
  Index eff_dim_B = 0;
  Index eff_dim_Omega = 0;
  Index s_star = 0;
  // Unscaled errors behind the ratios.
  double xb_error = 0.0;     // ||X(B - B0)||_F / sqrt(n)
  double omega_error = 0.0;  // ||Omega - Omega0||_F
  double b_error = 0.0;      // ||B - B0||_F
  double psi_error = 0.0;    // ||B Omega - B0 Omega0||_F
};

inline ContractionRecord contraction_record(const Dataset& data, const GroundTruth& truth,
                                            const FitResult& fit, const Hyperparameters& hp,
                                            double phi_sq) {
  if (!(phi_sq > 0.0)) throw InvalidArgument("contraction_record: phi_sq must be positive");
  const ModelEstimate& est = fit.estimate;
  detail::check_estimate_shape(data.X(), data.q(), est, "contraction_record");
  detail::check_estimate_shape(data.X(), data.q(), truth.as_estimate(), "contraction_record");
  ContractionRecord r;
  r.eps_n = epsilon_n(data.n(), data.p(), data.q(), truth.s0B, truth.s0Omega);
  const double eps_sq = r.eps_n * r.eps_n;
  const double n = static_cast<double>(data.n());

  const Matrix d_b = est.B - truth.B0;
  const double xb_sq = (data.X() * d_b).squaredNorm();
  const double om_sq = (est.Omega - truth.Omega0).squaredNorm();
  const double b_sq = d_b.squaredNorm();
  const double psi_sq = (direct_effects(est) - direct_effects(truth.as_estimate())).squaredNorm();

  double inv_b0_norm_sq = std::numeric_limits<double>::infinity();
  if (truth.B0.size() > 0) {
    const double op = Eigen::JacobiSVD<Matrix>(truth.B0).singularValues()(0);
    if (op > 0.0) inv_b0_norm_sq = 1.0 / (op * op);
  }

  r.xb_ratio = xb_sq / (n * eps_sq);
  r.omega_ratio = om_sq / eps_sq;
  r.b_ratio = b_sq * phi_sq / eps_sq;
  r.psi_ratio = psi_sq * std::min(inv_b0_norm_sq, phi_sq) / eps_sq;
  r.eff_dim_B = effective_dimension(est.B, hp.delta_beta());
  r.eff_dim_Omega = effective_dimension(est.Omega, hp.delta_omega(), DimensionMode::kOffDiagonal);
  r.s_star = std::max({data.q(), truth.s0Omega, truth.s0B});
  r.xb_error = std::sqrt(xb_sq / n);
  r.omega_error = std::sqrt(om_sq);
  r.b_error = std::sqrt(b_sq);
  r.psi_error = std::sqrt(psi_sq);
  return r;
}

using IndexSet = std::set<IndexPair>;

// Entries of m with |entry| > delta (pairs k < k' in off-diagonal mode).
inline IndexSet support_above(const Matrix& m, double delta,
                              DimensionMode mode = DimensionMode::kAllEntries) {
  IndexSet out;
  for (Index j = 0; j < m.rows(); ++j)
    for (Index k = mode == DimensionMode::kOffDiagonal ? j + 1 : 0; k < m.cols(); ++k)
      if (std::abs(m(j, k)) > delta) out.insert({j, k});
  return out;
}

struct SupportScores {
  double sensitivity = 1.0;
  double precision = 1.0;
};

// Empty sets score 1 on the side that would divide by zero.
inline SupportScores support_metrics(const IndexSet& estimated, const IndexSet& truth) {
  std::size_t hits = 0;
  for (const auto& e : estimated) hits += truth.count(e);
  SupportScores s;
  if (!truth.empty()) s.sensitivity = static_cast<double>(hits) / static_cast<double>(truth.size());
  if (!estimated.empty())
    s.precision = static_cast<double>(hits) / static_cast<double>(estimated.size());
  return s;
}

}  // namespace mssl

#endif  // MSSL_METRICS_HPP_
