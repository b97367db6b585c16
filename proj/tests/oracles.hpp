#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the library's numerical routines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Sym2 {
  double a, b, d;  // [[a, b], [b, d]]
  double det() const { return a * d - b * b; }
  Sym2 inverse() const {
    const double dt = det();
    return {d / dt, -b / dt, a / dt};
  }
  double quad(double x0, double x1) const { return a * x0 * x0 + 2.0 * b * x0 * x1 + d * x1 * x1; }
};

inline Sym2 sym2(const Mat& m) { return {m(0, 0), m(0, 1), m(1, 1)}; }

// Bivariate normal log density parameterized by its precision, evaluated
// through the covariance matrix and explicit 2x2 inverses.
inline double bvn_logpdf(double y0, double y1, double m0, double m1, const Sym2& precision) {
  const Sym2 sigma = precision.inverse();
  const Sym2 sigma_inv = sigma.inverse();
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(sigma.det()) -
         0.5 * sigma_inv.quad(y0 - m0, y1 - m1);
}

inline double loglik_q2(const Mat& x, const Mat& y, const Mat& b, const Mat& omega) {
  const Sym2 pr = sym2(omega);
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double m0 = 0.0, m1 = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      m0 += x(i, j) * b(j, 0);
      m1 += x(i, j) * b(j, 1);
    }
    total += bvn_logpdf(y(i, 0), y(i, 1), m0, m1, pr);
  }
  return total;
}

struct MonteCarloKl {
  double kl;        // E0[sum_i log f0_i/f_i] / n
  double variance;  // E0[sum_i (log f0_i/f_i - K_i)^2] / n
};

// Monte-Carlo estimate for q = 2 from `draws` independent samples of the full
// response matrix under (B0, Omega0). K_i is the per-row mean of the log ratio.
inline MonteCarloKl monte_carlo_kl_q2(const Mat& x, const Mat& b0, const Mat& omega0, const Mat& b,
                                      const Mat& omega, long draws, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  const Mat mu0 = x * b0, mu = x * b;
  const Sym2 p0 = sym2(omega0), p1 = sym2(omega);
  const Sym2 s0 = p0.inverse();
  // Lower Cholesky factor of Sigma0 by hand.
  const double l00 = std::sqrt(s0.a), l10 = s0.b / l00, l11 = std::sqrt(s0.d - l10 * l10);
  const double const_term = 0.5 * std::log(p0.det()) - 0.5 * std::log(p1.det());
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::vector<double> row_sum(n, 0.0), row_sq(n, 0.0);
  for (long r = 0; r < draws; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z0 = z(gen), z1 = z(gen);
      const double e0 = l00 * z0, e1 = l10 * z0 + l11 * z1;
      const double y0 = mu0(i, 0) + e0, y1 = mu0(i, 1) + e1;
      const double d0 = y0 - mu(i, 0), d1 = y1 - mu(i, 1);
      const double ell = const_term - 0.5 * p0.quad(e0, e1) + 0.5 * p1.quad(d0, d1);
      row_sum[i] += ell;
      row_sq[i] += ell * ell;
    }
  }
  double kl = 0.0, var = 0.0;
  const double m = static_cast<double>(draws);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = row_sum[i] / m;
    kl += mean;
    var += row_sq[i] / m - mean * mean;
  }
  return {kl / static_cast<double>(n), var / static_cast<double>(n)};
}

// Composite Simpson rule on [lo, hi] with `intervals` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, long intervals) {
  const double h = (hi - lo) / static_cast<double>(intervals);
  double s = f(lo) + f(hi);
  for (long i = 1; i < intervals; ++i) s += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double y, double mean, double precision) {
  return std::sqrt(precision / (2.0 * std::numbers::pi)) *
         std::exp(-0.5 * precision * (y - mean) * (y - mean));
}

// q = 1: (1/n) sum_i -log int sqrt(f_i f0_i) dy by quadrature.
inline double log_affinity_q1(const Mat& x, const Mat& b0, double omega0, const Mat& b,
                              double omega) {
  const Mat mu0 = x * b0, mu = x * b;
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double c = 0.5 * (mu0(i, 0) + mu(i, 0));
    const double sd = std::max(1.0 / std::sqrt(omega0), 1.0 / std::sqrt(omega));
    const double half = 40.0 * sd + std::abs(mu0(i, 0) - mu(i, 0));
    const auto integrand = [&](double y) {
      return std::sqrt(normal_pdf(y, mu0(i, 0), omega0) * normal_pdf(y, mu(i, 0), omega));
    };
    total += -std::log(simpson(integrand, c - half, c + half, 400000));
  }
  return total / static_cast<double>(x.rows());
}

// Spike-and-slab log density written from the mixture definition.
inline double log_ssl(double t, double lambda0, double lambda1, double theta) {
  const double a = std::abs(t);
  return std::log(theta * lambda1 / 2.0 * std::exp(-lambda1 * a) +
                  (1.0 - theta) * lambda0 / 2.0 * std::exp(-lambda0 * a));
}

struct GridMax {
  double value;
  double argmax;
};

// Maximum of -a t^2/2 + z t + log_ssl(t) on an evenly spaced grid that always
// contains 0.
inline GridMax grid_max_scalar(double a, double z, double lambda0, double lambda1, double theta,
                               double lo, double hi, long points) {
  const auto g = [&](double t) { return -0.5 * a * t * t + z * t + log_ssl(t, lambda0, lambda1, theta); };
  GridMax best{g(0.0), 0.0};
  for (long i = 0; i < points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = g(t);
    if (v > best.value) best = {v, t};
  }
  return best;
}

// Golden-section maximization of a unimodal function on [lo, hi].
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, int iters = 120) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    }
  }
  return 0.5 * (a + b);
}

// Brute-force maximizer of
//   (n/2) log det W - (n/2) tr(S W) - xi1 (w00 + w11) + log_ssl(w01)
// over 2x2 positive definite W = [[u, c], [c, v]]. For fixed c the objective
// is concave in (u, v); the off-diagonal is searched on a dense grid then
// refined by golden section. Returns {u, c, v}.
inline std::array<double, 3> brute_force_omega_q2(const Mat& s, double n, double xi0, double xi1,
                                                   double eta) {
  const auto h = [&](double u, double c, double v) {
    const double det = u * v - c * c;
    if (!(u > 0.0) || !(det > 0.0)) return -std::numeric_limits<double>::infinity();
    return 0.5 * n * std::log(det) - 0.5 * n * (s(0, 0) * u + 2.0 * s(0, 1) * c + s(1, 1) * v) -
           xi1 * (u + v) + log_ssl(c, xi0, xi1, eta);
  };
  const double u_cap = 20.0 / std::min(s(0, 0), s(1, 1));
  // Profile over v for fixed (u, c), then over u for fixed c.
  const auto best_v = [&](double u, double c) {
    const double floor_v = c * c / u;
    const double v = golden_max([&](double w) { return h(u, c, floor_v + w); }, 1e-12, u_cap, 90);
    return floor_v + v;
  };
  const auto profile_c = [&](double c, double* u_out = nullptr, double* v_out = nullptr) {
    const double u = golden_max([&](double uu) { return h(uu, c, best_v(uu, c)); }, 1e-9, u_cap, 90);
    const double v = best_v(u, c);
    if (u_out) *u_out = u;
    if (v_out) *v_out = v;
    return h(u, c, v);
  };
  const double c_cap = 0.99 * u_cap;
  const int grid = 2001;
  double best_c = 0.0, best_val = profile_c(0.0);
  const double step = 2.0 * c_cap / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double c = -c_cap + step * i;
    const double val = profile_c(c);
    if (val > best_val) {
      best_val = val;
      best_c = c;
    }
  }
  // Refine on each side of the best grid point separately so the kink at 0
  // is never straddled.
  double refined = best_c;
  if (best_c != 0.0) {
    double lo = best_c - step, hi = best_c + step;
    if (best_c > 0.0) lo = std::max(lo, 0.0);
    if (best_c < 0.0) hi = std::min(hi, 0.0);
    refined = golden_max([&](double c) { return profile_c(c); }, lo, hi, 90);
    if (profile_c(0.0) >= profile_c(refined)) refined = 0.0;
  } else {
    for (double side : {-1.0, 1.0}) {
      const double lo = side < 0 ? -step : 0.0, hi = side < 0 ? 0.0 : step;
      const double c = golden_max([&](double cc) { return profile_c(cc); }, lo, hi, 90);
      if (profile_c(c) > profile_c(refined)) refined = c;
    }
  }
  double u = 0.0, v = 0.0;
  profile_c(refined, &u, &v);
  return {u, refined, v};
}

// min ||X A||_F^2 / (n ||A||_F^2) over p x q matrices A with at most s
// nonzero entries. The quadratic form on vec(A) is (I_q kron G); each entry
// support of size s contributes the smallest eigenvalue of the matching
// principal submatrix, so the minimum over supports is exact.
inline double restricted_eigenvalue_direct(const Mat& x, int s, int q) {
  const int p = static_cast<int>(x.cols());
  const int total = p * q;
  const Mat gram = x.transpose() * x / static_cast<double>(x.rows());
  Mat op = Mat::Zero(total, total);  // entry e = j * q + k
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < p; ++l)
      for (int k = 0; k < q; ++k) op(j * q + k, l * q + k) = gram(j, l);
  s = std::min(s, total);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(s);
  for (int i = 0; i < s; ++i) idx[i] = i;
  while (true) {
    Mat sub(s, s);
    for (int a = 0; a < s; ++a)
      for (int b = 0; b < s; ++b) sub(a, b) = op(idx[a], idx[b]);
    Eigen::SelfAdjointEigenSolver<Mat> es(sub, Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues()(0));
    int i = s - 1;
    while (i >= 0 && idx[i] == total - s + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

inline Mat random_spd(int q, std::mt19937_64& gen, double lo = 0.3, double hi = 3.0) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(lo, hi);
  Mat g(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) g(i, j) = z(gen);
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat orth = qr.householderQ();
  Vec ev(q);
  for (int i = 0; i < q; ++i) ev(i) = u(gen);
  Mat m = orth * ev.asDiagonal() * orth.transpose();
  return 0.5 * (m + m.transpose());
}

inline Mat random_matrix(int r, int c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = z(gen);
  return m;
}

// Fixed p=2, q=2, n=50 instance shared with the acceptance suite.
struct KlInstance {
  Mat x, b0, omega0, b, omega;
};

inline KlInstance kl_instance() {
  std::mt19937_64 gen(20240611);
  KlInstance in;
  in.x = random_matrix(50, 2, gen);
  for (int j = 0; j < 2; ++j) in.x.col(j) *= std::sqrt(50.0) / in.x.col(j).norm();
  in.b0 = (Mat(2, 2) << 0.8, 0.0, -0.5, 0.3).finished();
  in.b = (Mat(2, 2) << 0.6, 0.1, -0.4, 0.2).finished();
  in.omega0 = (Mat(2, 2) << 1.5, 0.4, 0.4, 1.0).finished();
  in.omega = (Mat(2, 2) << 1.2, 0.1, 0.1, 1.3).finished();
  return in;
}

}  // namespace oracle
