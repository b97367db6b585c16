// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures (capped).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mssl/cli.hpp"
#include "mssl/mssl.hpp"
#include "oracles.hpp"

using namespace mssl;
namespace fs = std::filesystem;

namespace {

constexpr double kKlRelTol = 0.02;
constexpr double kVarRelTol = 0.05;
constexpr double kAffinityTol = 1e-6;
constexpr double kAscentSlack = 1e-8;
constexpr double kFloorSlack = 1e-10;
constexpr double kGridSlack = 1e-9;
constexpr double kIdentityOmegaTol = 1e-8;
constexpr double kBruteForceTol = 1e-6;
constexpr double kSlopeLo = -0.75, kSlopeHi = -0.25;
constexpr double kReTol = 1e-6;
constexpr double kSupportMin = 0.9;

int failures = 0;

void report(bool ok, const char* id, const std::string& detail) {
  std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentPlan load_plan(const char* name) {
  return plan_from_json(Json::parse(read_text(fs::path(MSSL_CONFIG_DIR) / name)));
}

void c1_divergences() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto in = oracle::kl_instance();
  GroundTruth t;
  t.B0 = in.b0;
  t.Omega0 = in.omega0;
  const auto mc = oracle::monte_carlo_kl_q2(in.x, in.b0, in.omega0, in.b, in.omega, 1000000, 99);
  const double kl = kl_divergence_per_obs(in.x, t, {in.b, in.omega});
  const double v = kl_variance_per_obs(in.x, t, {in.b, in.omega});
  const double kl_rel = std::abs(kl - mc.kl) / mc.kl, v_rel = std::abs(v - mc.variance) / mc.variance;

  const Matrix x1 = (Matrix(3, 1) << 1.3, -0.4, 0.8).finished();
  GroundTruth t1;
  t1.B0 = Matrix::Constant(1, 1, 0.7);
  t1.Omega0 = Matrix::Constant(1, 1, 1.6);
  const Matrix b1 = Matrix::Constant(1, 1, 0.2);
  const double rho = log_affinity_per_obs(x1, t1, {b1, Matrix::Constant(1, 1, 0.7)});
  const double rho_q = oracle::log_affinity_q1(x1, t1.B0, 1.6, b1, 0.7);
  const double secs = seconds_since(t0);
  report(kl_rel <= kKlRelTol && v_rel <= kVarRelTol && std::abs(rho - rho_q) <= kAffinityTol && secs < 60.0,
         "C1 divergence oracles",
         fmt("kl=%.6f mc=%.6f rel=%.4f; var=%.6f mc=%.6f rel=%.4f; affinity |diff|=%.2e; %.1fs", kl, mc.kl,
             kl_rel, v, mc.variance, v_rel, std::abs(rho - rho_q), secs));
}

void c2_ascent() {
  const auto t0 = std::chrono::steady_clock::now();
  const double tau = 1e-3;
  int bad_ascent = 0, bad_floor = 0;
  double worst_drop = 0.0, worst_eig = INFINITY;
  for (std::uint64_t i = 0; i < 100; ++i) {
    GenConfig g;
    g.n = 100;
    g.p = 10;
    g.q = 4;
    g.s0B = 8;
    g.s0Omega = 3;
    g.seed = 1000 + i;
    const GroundTruth truth = generate_truth(g);
    const Matrix x = generate_design(g.n, g.p, 2000 + i);
    const Dataset d(x, sample_responses(x, truth, 3000 + i));
    const Hyperparameters hp = theory_tuned_hyperparams(g.n, g.p, g.q, TuningKnobs{}, tau);
    SolverConfig sc;
    sc.tau = tau;
    const FitResult r = fit(d, hp, sc);
    double drop = 0.0;
    for (std::size_t k = 1; k < r.objective_trajectory.size(); ++k)
      drop = std::max(drop, r.objective_trajectory[k - 1] - r.objective_trajectory[k]);
    worst_drop = std::max(worst_drop, drop);
    if (drop > kAscentSlack) ++bad_ascent;
    const double e = min_eigenvalue(r.estimate.Omega);
    worst_eig = std::min(worst_eig, e);
    if (e < tau - kFloorSlack) ++bad_floor;
  }
  const double secs = seconds_since(t0);
  report(bad_ascent == 0 && bad_floor == 0 && secs < 120.0, "C2 ECM ascent",
         fmt("100 instances; ascent violations=%d (largest drop %.2e); floor violations=%d (min eig %.4g); %.1fs",
             bad_ascent, worst_drop, bad_floor, worst_eig, secs));
}

void c3_scalar() {
  std::mt19937_64 gen(9031);
  std::uniform_real_distribution<double> log_a(-1.0, 3.0), zs(-40.0, 40.0), log_slab(-3.0, 0.5),
      log_ratio(0.3, 12.0), log_w(-8.0, -0.1);
  int bad = 0;
  double worst = -INFINITY;
  for (int i = 0; i < 100; ++i) {
    const double a = std::pow(10.0, log_a(gen));
    const double z = zs(gen);
    const double slab = std::pow(10.0, log_slab(gen));
    const SpikeSlabParams prm{slab * std::pow(10.0, log_ratio(gen)), slab, std::pow(10.0, log_w(gen))};
    const double t = maximize_scalar(a, z, prm);
    const double range = std::abs(z) / a + 1.0;
    const auto grid =
        oracle::grid_max_scalar(a, z, prm.rate_spike, prm.rate_slab, prm.mix_weight, -range, range, 100000);
    const double got = -0.5 * a * t * t + z * t + oracle::log_ssl(t, prm.rate_spike, prm.rate_slab, prm.mix_weight);
    worst = std::max(worst, grid.value - got);
    if (got < grid.value - kGridSlack) ++bad;
  }
  report(bad == 0, "C3 scalar-update optimality",
         fmt("100 updates; grid beats update by at most %.2e (tolerance %.0e)", std::max(worst, 0.0), kGridSlack));
}

void c4_omega() {
  const Hyperparameters hp_id({2.0, 1.0, 0.5}, {5.0, 0.01, 0.5}, 1e-3);
  const auto id = m_step_Omega(Matrix::Identity(2, 2), 100, Matrix::Identity(2, 2), hp_id, 1);
  const double want = 100.0 / 100.02;
  const double id_err = std::max({std::abs(id.Omega(0, 0) - want), std::abs(id.Omega(1, 1) - want),
                                  std::abs(id.Omega(0, 1))});

  const Matrix s = (Matrix(2, 2) << 1.2, -0.5, -0.5, 0.9).finished();
  const double n = 80.0, xi0 = 15.0, xi1 = 0.05, eta = 0.4;
  const Hyperparameters hp({2.0, 1.0, 0.5}, {xi0, xi1, eta}, 1e-3);
  const auto out = m_step_Omega(s, 80, Matrix::Identity(2, 2), hp, 500);
  const auto bf = oracle::brute_force_omega_q2(s, n, xi0, xi1, eta);
  const double bf_err = std::max({std::abs(out.Omega(0, 0) - bf[0]), std::abs(out.Omega(0, 1) - bf[1]),
                                  std::abs(out.Omega(1, 1) - bf[2])});
  report(id_err <= kIdentityOmegaTol && std::abs(id.Omega(0, 0) - 0.999800) <= 5e-7 && bf_err <= kBruteForceTol,
         "C4 Omega update oracle",
         fmt("S=I diagonal %.8f (|err| %.1e); correlated case max |diff| vs brute force %.2e", id.Omega(0, 0),
             id_err, bf_err));
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt("%.4g", x);
  return s;
}

void c5_c6_contraction() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentPlan plan = load_plan("plan_contraction.json");
  const ExperimentReport r = run_contraction_experiment(plan);
  const double secs = seconds_since(t0);
  const RateSlopes sl = r.slopes.at(Method::kMssl);
  std::vector<double> om, xb, eb, eo, ss;
  for (Index n : plan.n_grid) {
    const auto& m = r.summary(Method::kMssl, n).medians;
    om.push_back(m.at("omega_error"));
    xb.push_back(m.at("xb_error"));
    eb.push_back(m.at("eff_dim_B"));
    eo.push_back(m.at("eff_dim_Omega"));
    ss.push_back(m.at("s_star"));
  }
  const auto in_range = [](const std::optional<double>& v) { return v && *v >= kSlopeLo && *v <= kSlopeHi; };
  report(r.failures == 0 && in_range(sl.omega_slope) && in_range(sl.xb_slope) && non_increasing(om) &&
             non_increasing(xb) && secs < 600.0,
         "C5 contraction slope",
         fmt("omega slope %.3f, xb slope %.3f (range [%.2f, %.2f]); medians omega [%s] xb [%s]; failed cells %d; %.1fs",
             sl.omega_slope.value_or(NAN), sl.xb_slope.value_or(NAN), kSlopeLo, kSlopeHi, join(om).c_str(),
             join(xb).c_str(), static_cast<int>(r.failures), secs));

  bool ok = r.failures == 0;
  std::vector<double> bound;
  for (std::size_t i = 0; i < om.size(); ++i) {
    bound.push_back(3.0 * ss[i]);
    ok = ok && eb[i] <= bound[i] && eo[i] <= bound[i];
  }
  report(ok, "C6 dimension recovery",
         fmt("median eff dim B [%s], Omega [%s], bound 3*s* [%s]", join(eb).c_str(), join(eo).c_str(),
             join(bound).c_str()));
}

void c7_restricted_eigenvalue() {
  const Index n = 64, p = 6;
  Matrix h(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) h(i, j) = ((i >> j) & 1) ? -1.0 : 1.0;
  bool ortho = true;
  for (Index s = 1; s <= 2 * p; ++s) ortho = ortho && restricted_eigenvalue(h, s).value == 1.0;

  std::mt19937_64 gen(7707);
  double worst = 0.0;
  bool monotone = true;
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = oracle::random_matrix(50, 6, gen);
    double prev = INFINITY;
    for (int s = 1; s <= 6; ++s) {
      const double v = restricted_eigenvalue(x, s).value;
      worst = std::max(worst, std::abs(v - oracle::restricted_eigenvalue_direct(x, s, 2)));
      monotone = monotone && v <= prev;
      prev = v;
    }
  }
  report(ortho && worst <= kReTol && monotone, "C7 restricted eigenvalue",
         fmt("orthogonal design exactly 1: %s; 20 designs max |diff| vs direct %.2e; non-increasing: %s",
             ortho ? "yes" : "no", worst, monotone ? "yes" : "no"));
}

void c8_rate_special_cases() {
  int points = 0, bad = 0;
  for (Index n : {10, 100, 1000, 25000, 1000000})
    for (Index dim : {2, 7, 50, 1000})
      for (Index s : {1, 3, 10, 40, 200}) {
        ++points;
        const double reg = std::sqrt(static_cast<double>(s) * std::log(static_cast<double>(dim)) /
                                     static_cast<double>(n));
        const double graph = std::sqrt(static_cast<double>(std::max(s, dim)) *
                                       std::log(static_cast<double>(dim)) / static_cast<double>(n));
        if (epsilon_n(n, dim, 1, s, 0) != reg || epsilon_n(n, 0, dim, 0, s) != graph) ++bad;
      }
  report(bad == 0 && points == 100, "C8 rate special cases", fmt("%d grid points, %d mismatches", points, bad));
}

void c9_support() {
  const ExperimentPlan plan = load_plan("plan_support.json");
  const ExperimentReport r = run_contraction_experiment(plan);
  const auto& m = r.summary(Method::kMssl, plan.n_grid.front()).medians;
  const double sens = m.at("sensitivity_B"), prec = m.at("precision_B");
  report(r.failures == 0 && sens >= kSupportMin && prec >= kSupportMin, "C9 support recovery",
         fmt("median sensitivity %.3f, precision %.3f over %d replicates", sens, prec, plan.replicates));
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), root).string(), read_text(e.path()));
  std::sort(files.begin(), files.end());
  return files;
}

void c10_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "mssl_acceptance_e2e";
  const std::string cfg = MSSL_CONFIG_DIR;
  const auto pipeline = [&]() {
    fs::remove_all(root);
    int rc = cli::run({"mssl", "generate", "--config", cfg + "/generate_default.json", "--out",
                       (root / "data").string()});
    rc |= cli::run({"mssl", "fit", "--data", (root / "data").string(), "--theory-tuned", "--config",
                    cfg + "/plan_default.json", "--out", (root / "fit").string()});
    rc |= cli::run({"mssl", "experiment", "--config", cfg + "/plan_default.json", "--threads", "2", "--out",
                    (root / "experiment").string()});
    return std::make_pair(rc, snapshot(root));
  };
  const auto [rc1, first] = pipeline();
  const auto [rc2, second] = pipeline();
  fs::remove_all(root);
  report(rc1 == 0 && rc2 == 0 && !first.empty() && first == second, "C10 end-to-end reproducibility",
         fmt("exit codes %d/%d; %zu files; byte-identical: %s", rc1, rc2, first.size(),
             first == second ? "yes" : "no"));
}

}  // namespace

int main() {
  c1_divergences();
  c2_ascent();
  c3_scalar();
  c4_omega();
  c5_c6_contraction();
  c7_restricted_eigenvalue();
  c8_rate_special_cases();
  c9_support();
  c10_reproducibility();
  std::printf("%d criteria failed\n", failures);
  return std::min(failures, 100);
}
