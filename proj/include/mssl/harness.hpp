#ifndef MSSL_HARNESS_HPP_
#define MSSL_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mssl/ecm.hpp"
#include "mssl/metrics.hpp"
#include "mssl/model.hpp"
#include "mssl/prior.hpp"
#include "mssl/rng.hpp"

namespace mssl {

struct GenConfig {
  Index n = 200;
  Index p = 20;
  Index q = 4;
  Index s0B = 8;
  Index s0Omega = 3;
  double a1 = 2.0;            // max |beta0|
  double b1 = 0.5;            // eig(Omega0) <= 1 / b1
  double b2 = 2.0;            // eig(Omega0) >= 1 / b2
  double signal_floor = 0.5;  // min |beta0| on the support
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || q < 1 || p < 0) throw InvalidArgument("GenConfig: need n >= 1, q >= 1, p >= 0");
    if (s0B < 0 || s0B > p * q) throw InvalidArgument("GenConfig: infeasible sparsity (s0B > pq)");
    if (s0Omega < 0 || s0Omega > q * (q - 1) / 2)
      throw InvalidArgument("GenConfig: infeasible sparsity (s0Omega > q(q-1)/2)");
    if (!(b1 > 0.0 && b2 > b1)) throw InvalidArgument("GenConfig: need b2 > b1 > 0");
    if (!(signal_floor > 0.0 && signal_floor <= a1))
      throw InvalidArgument("GenConfig: need 0 < signal_floor <= a1");
  }
};

namespace stream {
inline constexpr std::uint64_t kDesign = 0x44455349474eULL;
inline constexpr std::uint64_t kTruth = 0x5452555448ULL;
inline constexpr std::uint64_t kResponse = 0x52455350ULL;
}  // namespace stream

// n x p matrix of i.i.d. standard normals with every column rescaled to norm
// sqrt(n). Filled column by column from a single stream.
inline Matrix generate_design(Index n, Index p, std::uint64_t seed) {
  if (n < 1 || p < 0) throw InvalidArgument("generate_design: need n >= 1, p >= 0");
  CounterRng rng(seed, stream::kDesign);
  Matrix x(n, p);
  const double target = std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < p; ++j) {
    double norm = 0.0;
    do {
      for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();
      norm = x.col(j).norm();
    } while (!(norm > 0.0));
    x.col(j) *= target / norm;
  }
  return x;
}

namespace detail {

// First `count` entries of a uniform random permutation of [0, total).
inline std::vector<Index> sample_without_replacement(Index total, Index count, CounterRng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

// Sparse B0 and Omega0 satisfying the eigenvalue and magnitude bounds.
//
// Omega0 = alpha I + gamma M where M is a sparse symmetric matrix with zero
// diagonal and off-diagonal entries of magnitude in [0.5, 1]. gamma stretches
// M's spectrum over 90% of [1/b2, 1/b1] and alpha centres it; scaling leaves
// the support unchanged. With no off-diagonal support Omega0 is the identity
// clamped into the allowed range.
inline GroundTruth generate_truth(const GenConfig& config) {
  config.validate();
  CounterRng rng(config.seed, stream::kTruth);
  const Index p = config.p, q = config.q;
  GroundTruth t;
  t.a1 = config.a1;
  t.b1 = config.b1;
  t.b2 = config.b2;
  t.s0B = config.s0B;
  t.s0Omega = config.s0Omega;

  t.B0 = Matrix::Zero(p, q);
  for (Index flat : detail::sample_without_replacement(p * q, config.s0B, rng)) {
    const Index j = flat / q, k = flat % q;
    const double mag = rng.uniform(config.signal_floor, config.a1);
    t.B0(j, k) = rng.uniform() < 0.5 ? -mag : mag;
    t.supportB.emplace_back(j, k);
  }

  const double lo = 1.0 / config.b2, hi = 1.0 / config.b1;
  std::vector<IndexPair> pairs;
  for (Index k = 0; k < q; ++k)
    for (Index kk = k + 1; kk < q; ++kk) pairs.emplace_back(k, kk);
  Matrix m = Matrix::Zero(q, q);
  for (Index idx : detail::sample_without_replacement(static_cast<Index>(pairs.size()),
                                                      config.s0Omega, rng)) {
    const auto [k, kk] = pairs[static_cast<std::size_t>(idx)];
    const double mag = rng.uniform(0.5, 1.0);
    const double v = rng.uniform() < 0.5 ? -mag : mag;
    m(k, kk) = v;
    m(kk, k) = v;
    t.supportOmega.emplace_back(k, kk);
  }
  if (config.s0Omega == 0) {
    t.Omega0 = std::clamp(1.0, lo, hi) * Matrix::Identity(q, q);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const double mu_min = es.eigenvalues()(0), mu_max = es.eigenvalues()(q - 1);
    const double gamma = 0.9 * (hi - lo) / (mu_max - mu_min);
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw InvalidArgument("generate_truth: cannot fit the spectrum; widen the b1/b2 gap");
    const double alpha = 0.5 * (lo + hi) - 0.5 * gamma * (mu_max + mu_min);
    t.Omega0 = alpha * Matrix::Identity(q, q) + gamma * m;
  }
  t.validate();
  return t;
}

// Rows y_i ~ N(B0^T x_i, Omega0^{-1}), drawn as B0^T x_i + L z_i with
// L L^T = Omega0^{-1}.
inline Matrix sample_responses(const Matrix& x, const GroundTruth& truth, std::uint64_t seed) {
  const Index q = truth.Omega0.rows();
  if (truth.B0.rows() != x.cols() || truth.B0.cols() != q)
    throw DimensionError("sample_responses: B0 shape");
  const Matrix sigma0 = symmetrized(spd_inverse(truth.Omega0, "sample_responses: Omega0"));
  const Matrix chol = cholesky(sigma0, "sample_responses: Omega0^{-1}").matrixL();
  CounterRng rng(seed, stream::kResponse);
  Matrix z(x.rows(), q);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < q; ++k) z(i, k) = rng.normal();
  return x * truth.B0 + z * chol.transpose();
}

enum class ComparisonMode { kMsslOnly, kVsSeparateSsl, kGraphicalOnly };
enum class Method { kMssl, kSeparateSsl };

inline const char* to_string(Method m) { return m == Method::kMssl ? "mssl" : "separate_ssl"; }

struct ExperimentPlan {
  GenConfig base;
  std::vector<Index> n_grid{200, 400, 800, 1600, 3200};
  int replicates = 20;
  TuningKnobs knobs;
  SolverConfig solver;
  ComparisonMode comparison_mode = ComparisonMode::kMsslOnly;

  void validate() const {
    if (n_grid.empty()) throw InvalidArgument("ExperimentPlan: n_grid is empty");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (!(n_grid[i] > n_grid[i - 1]))
        throw InvalidArgument("ExperimentPlan: n_grid must be strictly increasing");
    if (replicates < 1) throw InvalidArgument("ExperimentPlan: replicates must be at least 1");
    GenConfig g = base;
    for (Index n : n_grid) {
      g.n = n;
      g.validate();
    }
    knobs.validate();
    solver.validate();
    if (comparison_mode == ComparisonMode::kVsSeparateSsl && base.q < 2)
      throw InvalidArgument("ExperimentPlan: comparison needs q >= 2");
  }
};

struct CellResult {
  Index n = 0;
  int replicate = 0;
  Method method = Method::kMssl;
  bool ok = false;
  std::string error;
  ContractionRecord record;
  double phi_sq = 0.0;
  bool phi_exact = true;
  SupportScores support_B;
  SupportScores support_Omega;
  int iterations = 0;
  bool converged = false;
  bool floor_projection_applied = false;
};

// Numeric per-cell metrics that are summarized by median. The names double
// as CSV column and JSON key names.
inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "eps_n",       "xb_ratio",      "omega_ratio",    "b_ratio",        "psi_ratio",
      "xb_error",    "omega_error",   "b_error",        "psi_error",      "eff_dim_B",
      "eff_dim_Omega", "s_star",      "phi_sq",         "sensitivity_B",  "precision_B",
      "sensitivity_Omega", "precision_Omega", "iterations"};
  return names;
}

inline double metric_value(const CellResult& c, const std::string& name) {
  static const std::map<std::string, double (*)(const CellResult&)> table{
      {"eps_n", [](const CellResult& x) { return x.record.eps_n; }},
      {"xb_ratio", [](const CellResult& x) { return x.record.xb_ratio; }},
      {"omega_ratio", [](const CellResult& x) { return x.record.omega_ratio; }},
      {"b_ratio", [](const CellResult& x) { return x.record.b_ratio; }},
      {"psi_ratio", [](const CellResult& x) { return x.record.psi_ratio; }},
      {"xb_error", [](const CellResult& x) { return x.record.xb_error; }},
      {"omega_error", [](const CellResult& x) { return x.record.omega_error; }},
      {"b_error", [](const CellResult& x) { return x.record.b_error; }},
      {"psi_error", [](const CellResult& x) { return x.record.psi_error; }},
      {"eff_dim_B", [](const CellResult& x) { return static_cast<double>(x.record.eff_dim_B); }},
      {"eff_dim_Omega",
       [](const CellResult& x) { return static_cast<double>(x.record.eff_dim_Omega); }},
      {"s_star", [](const CellResult& x) { return static_cast<double>(x.record.s_star); }},
      {"phi_sq", [](const CellResult& x) { return x.phi_sq; }},
      {"sensitivity_B", [](const CellResult& x) { return x.support_B.sensitivity; }},
      {"precision_B", [](const CellResult& x) { return x.support_B.precision; }},
      {"sensitivity_Omega", [](const CellResult& x) { return x.support_Omega.sensitivity; }},
      {"precision_Omega", [](const CellResult& x) { return x.support_Omega.precision; }},
      {"iterations", [](const CellResult& x) { return static_cast<double>(x.iterations); }},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw InvalidArgument("metric_value: unknown metric " + name);
  return it->second(c);
}

struct NSummary {
  Method method = Method::kMssl;
  Index n = 0;
  int cells = 0;
  int failures = 0;
  std::map<std::string, double> medians;  // over successful cells; NaN if none
};

struct RateSlopes {
  std::optional<double> omega_slope;  // d log median ||Omega - Omega0||_F / d log n
  std::optional<double> xb_slope;     // same for ||X(B - B0)||_F / sqrt(n)
};

struct ExperimentReport {
  ExperimentPlan plan;
  std::vector<CellResult> cells;       // ordered by (n, replicate, method)
  std::vector<NSummary> summaries;     // ordered by (method, n)
  std::map<Method, RateSlopes> slopes;
  int failures = 0;

  const NSummary& summary(Method m, Index n) const {
    for (const auto& s : summaries)
      if (s.method == m && s.n == n) return s;
    throw InvalidArgument("ExperimentReport: no summary for that (method, n)");
  }
};

// Median (mean of the middle pair for even sizes); NaN for an empty sample.
inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// Least-squares slope of log(y) on log(x); nullopt with fewer than two
// usable points.
inline std::optional<double> log_log_slope(const std::vector<double>& x,
                                           const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::nullopt;
  const double k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  return sxy / sxx;
}

struct CellSeeds {
  std::uint64_t truth, design, response;
};

// Truth depends on the replicate only, so each replicate follows one
// (B0, Omega0) along the n grid; data streams depend on (n, replicate).
inline CellSeeds cell_seeds(std::uint64_t seed, Index n, int replicate) {
  const auto rep = static_cast<std::uint64_t>(replicate);
  const auto nn = static_cast<std::uint64_t>(n);
  return {derive_seed(seed, {stream::kTruth, rep}), derive_seed(seed, {stream::kDesign, nn, rep}),
          derive_seed(seed, {stream::kResponse, nn, rep})};
}

namespace detail {

inline CellResult evaluate_fit(const Dataset& data, const GroundTruth& truth,
                               const Hyperparameters& hp, const SolverConfig& solver,
                               const RestrictedEigenvalue& phi, Method method, Index n,
                               int replicate) {
  CellResult cell;
  cell.n = n;
  cell.replicate = replicate;
  cell.method = method;
  try {
    SolverConfig cfg = solver;
    cfg.structure = method == Method::kMssl ? OmegaStructure::kFull : OmegaStructure::kDiagonal;
    const FitResult fr = fit(data, hp, cfg);
    const Hyperparameters used(hp.beta_prior(), hp.omega_prior(), cfg.tau);
    cell.phi_sq = phi.value;
    cell.phi_exact = phi.exact;
    cell.record = contraction_record(data, truth, fr, used, phi.value);
    const IndexSet true_b(truth.supportB.begin(), truth.supportB.end());
    const IndexSet true_o(truth.supportOmega.begin(), truth.supportOmega.end());
    cell.support_B = support_metrics(support_above(fr.estimate.B, used.delta_beta()), true_b);
    cell.support_Omega = support_metrics(
        support_above(fr.estimate.Omega, used.delta_omega(), DimensionMode::kOffDiagonal), true_o);
    cell.iterations = fr.n_outer_iters;
    cell.converged = fr.converged;
    cell.floor_projection_applied = fr.floor_projection_applied;
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

inline std::vector<CellResult> run_cell(const ExperimentPlan& plan, Index n, int replicate) {
  const bool graphical = plan.comparison_mode == ComparisonMode::kGraphicalOnly;
  GenConfig gen = plan.base;
  gen.n = n;
  if (graphical) {
    gen.p = 0;
    gen.s0B = 0;
  }
  std::vector<Method> methods{Method::kMssl};
  if (plan.comparison_mode == ComparisonMode::kVsSeparateSsl) methods.push_back(Method::kSeparateSsl);

  std::vector<CellResult> out;
  try {
    const CellSeeds seeds = cell_seeds(plan.base.seed, n, replicate);
    GenConfig truth_cfg = gen;
    truth_cfg.seed = seeds.truth;
    const GroundTruth truth = generate_truth(truth_cfg);
    const Matrix x = generate_design(n, gen.p, seeds.design);
    const Dataset ds(x, sample_responses(x, truth, seeds.response), Dataset::Normalization::kAsIs);
    const Hyperparameters hp = theory_tuned_hyperparams(n, gen.p, gen.q, plan.knobs,
                                                        plan.solver.tau, schedule_for(gen.p, gen.q));
    RestrictedEigenvalue phi{1.0, true};
    if (gen.p > 0) {
      const Index s_star = std::max({gen.q, gen.s0Omega, gen.s0B});
      phi = restricted_eigenvalue(x, std::min(gen.p, gen.s0B + s_star));
    }
    for (Method m : methods)
      out.push_back(evaluate_fit(ds, truth, hp, plan.solver, phi, m, n, replicate));
  } catch (const std::exception& e) {
    out.clear();
    for (Method m : methods) {
      CellResult c;
      c.n = n;
      c.replicate = replicate;
      c.method = m;
      c.error = e.what();
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline ExperimentReport run_plan(const ExperimentPlan& plan, unsigned threads) {
  plan.validate();
  struct Task {
    Index n;
    int replicate;
  };
  std::vector<Task> tasks;
  for (Index n : plan.n_grid)
    for (int r = 0; r < plan.replicates; ++r) tasks.push_back({n, r});

  std::vector<std::vector<CellResult>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
      results[i] = run_cell(plan, tasks[i].n, tasks[i].replicate);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  ExperimentReport report;
  report.plan = plan;
  for (auto& r : results)
    for (auto& c : r) report.cells.push_back(std::move(c));

  std::vector<Method> methods{Method::kMssl};
  if (plan.comparison_mode == ComparisonMode::kVsSeparateSsl) methods.push_back(Method::kSeparateSsl);
  for (Method m : methods) {
    std::vector<double> ns, om, xb;
    for (Index n : plan.n_grid) {
      NSummary s;
      s.method = m;
      s.n = n;
      for (const auto& name : metric_names()) {
        std::vector<double> vals;
        for (const auto& c : report.cells)
          if (c.method == m && c.n == n && c.ok) vals.push_back(metric_value(c, name));
        s.medians[name] = median(std::move(vals));
      }
      for (const auto& c : report.cells) {
        if (c.method != m || c.n != n) continue;
        ++s.cells;
        s.failures += !c.ok;
      }
      report.failures += s.failures;
      ns.push_back(static_cast<double>(n));
      om.push_back(s.medians["omega_error"]);
      xb.push_back(s.medians["xb_error"]);
      report.summaries.push_back(std::move(s));
    }
    RateSlopes slopes;
    slopes.omega_slope = log_log_slope(ns, om);
    if (plan.comparison_mode != ComparisonMode::kGraphicalOnly && plan.base.p > 0)
      slopes.xb_slope = log_log_slope(ns, xb);
    report.slopes[m] = slopes;
  }
  return report;
}

}  // namespace detail

// For each n and replicate: generate (X, Y, truth), fit with theory-tuned
// hyperparameters, and score the fit. Cells are independent and run on up to
// `threads` workers; the report does not depend on the thread count.
inline ExperimentReport run_contraction_experiment(const ExperimentPlan& plan,
                                                   unsigned threads = 1) {
  ExperimentPlan p = plan;
  if (p.comparison_mode == ComparisonMode::kVsSeparateSsl) p.comparison_mode = ComparisonMode::kMsslOnly;
  return detail::run_plan(p, threads);
}

// Same grid, each problem fitted by full mSSL and by the diagonal-Omega
// ("separate SSL") variant: two rows per (n, replicate).
inline ExperimentReport run_comparison_separate_ssl(const ExperimentPlan& plan,
                                                    unsigned threads = 1) {
  ExperimentPlan p = plan;
  p.comparison_mode = ComparisonMode::kVsSeparateSsl;
  return detail::run_plan(p, threads);
}

}  // namespace mssl

#endif  // MSSL_HARNESS_HPP_
