#ifndef MSSL_CLI_HPP_
#define MSSL_CLI_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mssl/ecm.hpp"
#include "mssl/harness.hpp"
#include "mssl/io.hpp"
#include "mssl/log.hpp"
#include "mssl/metrics.hpp"
#include "mssl/model.hpp"

namespace mssl::cli {

enum ExitCode : int { kOk = 0, kDegraded = 1, kInvalidInput = 2, kIoFailure = 3 };

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string data_dir;
  std::string fit_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool theory_tuned = false;
  std::optional<std::string> tau_text;  // kept verbatim for echoing
  std::string ladder_path;
  bool normalize = false;
  std::vector<std::string> argv;
};

namespace detail {

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InvalidArgument("missing input file " + p.string());
}

inline fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw InvalidArgument("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  return fs::path(dir);
}

inline std::optional<double> tau_value(const RunConfig& rc) {
  if (!rc.tau_text) return std::nullopt;
  const double tau = parse_double(*rc.tau_text, "--tau");
  if (!(tau > 0.0)) throw InvalidArgument("--tau must be positive");
  return tau;
}

inline Json argv_json(const RunConfig& rc) { return Json(rc.argv); }

// Hyperparameters for fit/metrics: a JSON file, or the theory schedules with
// knobs optionally taken from the same file's "knobs" object.
struct HyperChoice {
  Hyperparameters hp;
  SolverConfig solver;
  Json source;
};

inline HyperChoice choose_hyperparameters(const RunConfig& rc, Index n, Index p, Index q) {
  Json cfg = Json::object();
  if (!rc.config_path.empty()) cfg = read_json(rc.config_path);
  if (!cfg.is_object()) throw InvalidArgument("--config must hold a JSON object");
  const std::optional<double> tau_flag = tau_value(rc);
  SolverConfig solver = cfg.contains("solver") ? solver_from_json(cfg.at("solver")) : SolverConfig{};
  double tau = tau_flag.value_or(cfg.contains("tau") ? cfg.at("tau").get<double>() : solver.tau);
  solver.tau = tau;
  if (!rc.ladder_path.empty()) solver.ladder = ladder_from_json(read_json(rc.ladder_path));
  solver.validate();

  if (rc.theory_tuned) {
    const TuningKnobs knobs = cfg.contains("knobs") ? knobs_from_json(cfg.at("knobs")) : TuningKnobs{};
    Hyperparameters hp = theory_tuned_hyperparams(n, p, q, knobs, tau, schedule_for(p, q));
    return {hp, solver, {{"theory_tuned", true}, {"knobs", to_json(knobs)}}};
  }
  if (rc.config_path.empty())
    throw InvalidArgument("need a hyperparameter --config or --theory-tuned");
  const Hyperparameters file_hp = hyperparameters_from_json(cfg);
  return {Hyperparameters(file_hp.beta_prior(), file_hp.omega_prior(), tau), solver,
          {{"theory_tuned", false}, {"config", rc.config_path}}};
}

}  // namespace detail

inline int cmd_generate(const RunConfig& rc) {
  GenConfig g;
  if (!rc.config_path.empty()) g = gen_config_from_json(read_json(rc.config_path));
  if (rc.seed) g.seed = *rc.seed;
  g.validate();
  const GroundTruth truth = generate_truth(g);
  const Matrix x = generate_design(g.n, g.p, derive_seed(g.seed, {stream::kDesign}));
  const Matrix y = sample_responses(x, truth, derive_seed(g.seed, {stream::kResponse}));

  const fs::path out = detail::prepare_out_dir(rc.out_dir);
  write_matrix_csv(out / "X.csv", x);
  write_matrix_csv(out / "Y.csv", y);
  write_matrix_csv(out / "truth_B0.csv", truth.B0);
  write_matrix_csv(out / "truth_Omega0.csv", truth.Omega0);
  Json sb = Json::array(), so = Json::array();
  for (const auto& [j, k] : truth.supportB) sb.push_back({j, k});
  for (const auto& [k, kk] : truth.supportOmega) so.push_back({k, kk});
  write_json(out / "truth_meta.json", {{"config", to_json(g)},
                                       {"s0B", truth.s0B},
                                       {"s0Omega", truth.s0Omega},
                                       {"a1", truth.a1},
                                       {"b1", truth.b1},
                                       {"b2", truth.b2},
                                       {"supportB", sb},
                                       {"supportOmega", so}});
  log::info("generate: wrote 5 files to " + out.string());
  return kOk;
}

namespace detail {

inline Dataset load_dataset(const RunConfig& rc) {
  if (rc.data_dir.empty()) throw InvalidArgument("--data is required");
  const fs::path dir(rc.data_dir);
  require_file(dir / "X.csv");
  require_file(dir / "Y.csv");
  Matrix x = read_matrix_csv(dir / "X.csv");
  Matrix y = read_matrix_csv(dir / "Y.csv");
  if (x.rows() != y.rows())
    throw DimensionError("X.csv has " + std::to_string(x.rows()) + " rows but Y.csv has " +
                         std::to_string(y.rows()));
  return Dataset(std::move(x), std::move(y),
                 rc.normalize ? Dataset::Normalization::kRescale : Dataset::Normalization::kAsIs);
}

}  // namespace detail

inline int cmd_fit(const RunConfig& rc) {
  const Dataset data = detail::load_dataset(rc);
  const auto choice = detail::choose_hyperparameters(rc, data.n(), data.p(), data.q());
  if (!data.columns_normalized())
    log::error("fit: columns of X do not have norm sqrt(n); pass --normalize to rescale");
  const fs::path out = detail::prepare_out_dir(rc.out_dir);

  Json summary = {{"command_line", detail::argv_json(rc)},
                  {"tau", choice.solver.tau},
                  {"tau_arg", rc.tau_text ? Json(*rc.tau_text) : Json(nullptr)},
                  {"hyperparameters", to_json(Hyperparameters(choice.hp.beta_prior(),
                                                              choice.hp.omega_prior(),
                                                              choice.solver.tau))},
                  {"hyperparameter_source", choice.source},
                  {"solver", to_json(choice.solver)},
                  {"columns_normalized", data.columns_normalized()},
                  {"n", data.n()},
                  {"p", data.p()},
                  {"q", data.q()}};
  try {
    const FitResult fr = fit(data, choice.hp, choice.solver);
    write_matrix_csv(out / "B_hat.csv", fr.estimate.B);
    write_matrix_csv(out / "Omega_hat.csv", fr.estimate.Omega);
    summary["objective_trajectory"] = fr.objective_trajectory;
    summary["n_outer_iters"] = fr.n_outer_iters;
    summary["converged"] = fr.converged;
    summary["floor_projection_applied"] = fr.floor_projection_applied;
    summary["effective_dims"] = {{"B", fr.eff_dim_B}, {"Omega", fr.eff_dim_Omega}};
    write_json(out / "fit_summary.json", summary);
    log::info("fit: " + std::to_string(fr.n_outer_iters) + " outer iterations");
    return fr.converged ? kOk : kDegraded;
  } catch (const FitError& e) {
    write_matrix_csv(out / "B_hat.csv", e.iterate().B);
    write_matrix_csv(out / "Omega_hat.csv", e.iterate().Omega);
    summary["error"] = e.what();
    summary["failed_iteration"] = e.iteration();
    summary["converged"] = false;
    write_json(out / "fit_summary.json", summary);
    log::error(e.what());
    return kDegraded;
  }
}

namespace detail {

inline int run_experiment(const RunConfig& rc, bool compare) {
  ExperimentPlan plan;
  if (!rc.config_path.empty()) plan = plan_from_json(read_json(rc.config_path));
  if (rc.seed) plan.base.seed = *rc.seed;
  if (const auto tau = tau_value(rc)) plan.solver.tau = *tau;
  if (compare) plan.comparison_mode = ComparisonMode::kVsSeparateSsl;
  plan.validate();
  const fs::path out = prepare_out_dir(rc.out_dir);
  log::info("experiment: " + std::to_string(plan.n_grid.size() * plan.replicates) + " cells on " +
            std::to_string(rc.threads) + " threads");
  const ExperimentReport report = compare ? run_comparison_separate_ssl(plan, rc.threads)
                                          : run_contraction_experiment(plan, rc.threads);
  write_text(out / "contraction_records.csv", records_csv(report));
  write_json(out / "summary.json", summary_json(report));
  write_text(out / "rate_curve.csv", rate_curve_csv(report));
  for (const auto& c : report.cells)
    if (!c.ok) log::error("cell n=" + std::to_string(c.n) + " rep=" + std::to_string(c.replicate) +
                          ": " + c.error);
  return report.failures == static_cast<int>(report.cells.size()) ? kDegraded : kOk;
}

}  // namespace detail

inline int cmd_experiment(const RunConfig& rc) { return detail::run_experiment(rc, false); }
inline int cmd_compare(const RunConfig& rc) { return detail::run_experiment(rc, true); }

// Scores a fit against the generator's truth: contraction record,
// divergences, restricted eigenvalue and support recovery.
inline int cmd_metrics(const RunConfig& rc) {
  const Dataset data = detail::load_dataset(rc);
  if (rc.fit_dir.empty()) throw InvalidArgument("--fit is required");
  const fs::path data_dir(rc.data_dir), fit_dir(rc.fit_dir);
  for (const char* f : {"truth_B0.csv", "truth_Omega0.csv", "truth_meta.json"})
    detail::require_file(data_dir / f);
  for (const char* f : {"B_hat.csv", "Omega_hat.csv"}) detail::require_file(fit_dir / f);

  const Json meta = read_json(data_dir / "truth_meta.json");
  GroundTruth truth;
  truth.B0 = read_matrix_csv(data_dir / "truth_B0.csv");
  truth.Omega0 = read_matrix_csv(data_dir / "truth_Omega0.csv");
  truth.s0B = meta.at("s0B").get<Index>();
  truth.s0Omega = meta.at("s0Omega").get<Index>();
  truth.a1 = meta.at("a1").get<double>();
  truth.b1 = meta.at("b1").get<double>();
  truth.b2 = meta.at("b2").get<double>();
  for (const auto& e : meta.at("supportB")) truth.supportB.emplace_back(e[0].get<Index>(), e[1].get<Index>());
  for (const auto& e : meta.at("supportOmega"))
    truth.supportOmega.emplace_back(e[0].get<Index>(), e[1].get<Index>());

  FitResult fr;
  fr.estimate.B = read_matrix_csv(fit_dir / "B_hat.csv");
  fr.estimate.Omega = read_matrix_csv(fit_dir / "Omega_hat.csv");
  const auto choice = detail::choose_hyperparameters(rc, data.n(), data.p(), data.q());
  const Hyperparameters hp(choice.hp.beta_prior(), choice.hp.omega_prior(), choice.solver.tau);

  RestrictedEigenvalue phi{1.0, true};
  if (data.p() > 0) {
    const Index s_star = std::max({data.q(), truth.s0Omega, truth.s0B});
    phi = restricted_eigenvalue(data.X(), std::min(data.p(), truth.s0B + s_star));
  }
  const ContractionRecord r = contraction_record(data, truth, fr, hp, phi.value);
  const IndexSet tb(truth.supportB.begin(), truth.supportB.end());
  const IndexSet to(truth.supportOmega.begin(), truth.supportOmega.end());
  const SupportScores sb = support_metrics(support_above(fr.estimate.B, hp.delta_beta()), tb);
  const SupportScores so = support_metrics(
      support_above(fr.estimate.Omega, hp.delta_omega(), DimensionMode::kOffDiagonal), to);

  const fs::path out = detail::prepare_out_dir(rc.out_dir);
  write_json(out / "metrics.json",
             {{"command_line", detail::argv_json(rc)},
              {"hyperparameters", to_json(hp)},
              {"eps_n", r.eps_n},
              {"xb_ratio", r.xb_ratio},
              {"omega_ratio", r.omega_ratio},
              {"b_ratio", r.b_ratio},
              {"psi_ratio", r.psi_ratio},
              {"xb_error", r.xb_error},
              {"omega_error", r.omega_error},
              {"b_error", r.b_error},
              {"psi_error", r.psi_error},
              {"eff_dim_B", r.eff_dim_B},
              {"eff_dim_Omega", r.eff_dim_Omega},
              {"s_star", r.s_star},
              {"phi_sq", phi.value},
              {"phi_exact", phi.exact},
              {"kl_divergence_per_obs", kl_divergence_per_obs(data.X(), truth, fr.estimate)},
              {"kl_variance_per_obs", kl_variance_per_obs(data.X(), truth, fr.estimate)},
              {"log_affinity_per_obs", log_affinity_per_obs(data.X(), truth, fr.estimate)},
              {"support_B", {{"sensitivity", sb.sensitivity}, {"precision", sb.precision}}},
              {"support_Omega", {{"sensitivity", so.sensitivity}, {"precision", so.precision}}}});
  return kOk;
}

// Parses argv and dispatches. Never throws: errors map to exit codes
// 2 (invalid input) and 3 (I/O failure).
inline int run(const std::vector<std::string>& args) {
  RunConfig rc;
  rc.argv = args;
  CLI::App app{"Multivariate spike-and-slab LASSO: fitting and contraction experiments", "mssl"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", rc.config_path, "JSON config file");
    sub->add_option("--out", rc.out_dir, "Output directory")->required();
    sub->add_option("--seed", seed, "Seed override (u64)");
    sub->add_option("--threads", rc.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tau", rc.tau_text, "Eigenvalue floor for Omega");
  };
  auto add_fit_inputs = [&](CLI::App* sub) {
    sub->add_option("--data", rc.data_dir, "Directory holding X.csv and Y.csv")->required();
    sub->add_flag("--theory-tuned", rc.theory_tuned, "Use the theory hyperparameter schedules");
    sub->add_option("--ladder", rc.ladder_path, "JSON list of {lambda0, xi0} spike rates");
    sub->add_flag("--normalize", rc.normalize, "Rescale X columns to norm sqrt(n)");
  };
  auto* gen = app.add_subcommand("generate", "Simulate a dataset and its ground truth");
  add_common(gen);
  auto* fit_cmd = app.add_subcommand("fit", "Fit mSSL to X.csv / Y.csv");
  add_common(fit_cmd);
  add_fit_inputs(fit_cmd);
  auto* exp = app.add_subcommand("experiment", "Run a replicated contraction experiment");
  add_common(exp);
  auto* cmp = app.add_subcommand("compare", "Compare mSSL against separate SSL");
  add_common(cmp);
  auto* met = app.add_subcommand("metrics", "Score a fit against the generator's truth");
  add_common(met);
  add_fit_inputs(met);
  met->add_option("--fit", rc.fit_dir, "Directory holding B_hat.csv and Omega_hat.csv")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalidInput;
  }
  rc.seed = seed;
  rc.command = app.get_subcommands().front()->get_name();

  try {
    if (rc.command == "generate") return cmd_generate(rc);
    if (rc.command == "fit") return cmd_fit(rc);
    if (rc.command == "experiment") return cmd_experiment(rc);
    if (rc.command == "compare") return cmd_compare(rc);
    if (rc.command == "metrics") return cmd_metrics(rc);
  } catch (const IoError& e) {
    log::error(e.what());
    return kIoFailure;
  } catch (const std::invalid_argument& e) {
    log::error(e.what());
    return kInvalidInput;
  } catch (const std::domain_error& e) {
    log::error(e.what());
    return kInvalidInput;
  } catch (const nlohmann::json::exception& e) {
    log::error(e.what());
    return kInvalidInput;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kDegraded;
  }
  return kInvalidInput;
}

}  // namespace mssl::cli

#endif  // MSSL_CLI_HPP_
