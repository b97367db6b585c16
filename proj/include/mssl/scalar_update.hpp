#ifndef MSSL_SCALAR_UPDATE_HPP_
#define MSSL_SCALAR_UPDATE_HPP_

#include <algorithm>
#include <array>
#include <cmath>

#include "mssl/prior.hpp"

namespace mssl {

// g(t) = -curvature/2 * t^2 + linear * t + log_mixture_density(t).
//
// Every coordinate update of the solver (entries of B and off-diagonal
// entries of Omega) reduces to maximizing a function of this form.
inline double scalar_objective(double t, double curvature, double linear,
                               const SpikeSlabParams& prm) {
  return -0.5 * curvature * t * t + linear * t + log_mixture_density(t, prm);
}

namespace detail {

// g'(t) for t > 0 when linear >= 0.
inline double scalar_slope(double t, double curvature, double linear,
                           const SpikeSlabParams& prm) {
  return linear - curvature * t - adaptive_penalty(t, prm);
}

// Root of a monotone slope on [lo, hi] with a sign change, by bisection to
// machine resolution.
inline double bisect_slope(double lo, double hi, double curvature, double linear,
                           const SpikeSlabParams& prm) {
  const bool rising = scalar_slope(lo, curvature, linear, prm) < 0.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double s = scalar_slope(mid, curvature, linear, prm);
    if ((s < 0.0) == rising)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Exact global maximizer of scalar_objective.
//
// For t > 0 the second derivative is -curvature + (r0 - r1)^2 s (1 - s), with
// s the inclusion probability, which is logistic in t. The slope is therefore
// decreasing, then increasing, then decreasing, with breakpoints available in
// closed form. Each monotone piece holds at most one stationary point, found by
// bisection; the best of {0, stationary points} is returned, ties going to 0.
// The maximizer has the sign of `linear` (or is 0).
inline double maximize_scalar(double curvature, double linear, const SpikeSlabParams& prm) {
  if (!(curvature > 0.0) || linear == 0.0) return 0.0;
  const double z = std::abs(linear);
  const double sign = linear > 0.0 ? 1.0 : -1.0;
  // Beyond (z - r1) / curvature the slope is negative since the penalty >= r1.
  const double upper = (z - prm.rate_slab) / curvature;
  if (!(upper > 0.0)) return 0.0;

  std::array<double, 4> knots{0.0, 0.0, upper, upper};
  const double gap = prm.rate_spike - prm.rate_slab;
  if (gap > 0.0) {
    const double c = curvature / (gap * gap);
    if (c < 0.25) {
      // 2 atanh(r) with r = sqrt(1 - 4c), written to survive c ~ 1e-30.
      const double r = std::sqrt(1.0 - 4.0 * c);
      const double half_width = (2.0 * std::log1p(r) - std::log(4.0 * c)) / gap;
      const double center = (std::log((1.0 - prm.mix_weight) * prm.rate_spike) -
                             std::log(prm.mix_weight * prm.rate_slab)) /
                            gap;
      knots[1] = std::clamp(center - half_width, 0.0, upper);
      knots[2] = std::clamp(center + half_width, 0.0, upper);
    }
  }

  double best_t = 0.0;
  double best_g = scalar_objective(0.0, curvature, z, prm);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double lo = knots[i], hi = knots[i + 1];
    if (!(hi > lo)) continue;
    const double s_lo = detail::scalar_slope(lo, curvature, z, prm);
    const double s_hi = detail::scalar_slope(hi, curvature, z, prm);
    double cand;
    if ((s_lo > 0.0) != (s_hi > 0.0))
      cand = detail::bisect_slope(lo, hi, curvature, z, prm);
    else
      cand = s_lo > 0.0 ? hi : lo;  // monotone piece without a root: best end
    const double g = scalar_objective(cand, curvature, z, prm);
    if (g > best_g) {
      best_g = g;
      best_t = cand;
    }
  }
  return sign * best_t;
}

}  // namespace mssl

#endif  // MSSL_SCALAR_UPDATE_HPP_
