#ifndef MSSL_IO_HPP_
#define MSSL_IO_HPP_

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mssl/ecm.hpp"
#include "mssl/harness.hpp"
#include "mssl/linalg.hpp"
#include "mssl/prior.hpp"

namespace mssl {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InvalidArgument(where + ": cannot parse number '" + std::string(text) + "'");
  return v;
}

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Matrix CSV: a header row of column indices, then one row per matrix row,
// row-major, '.' decimal point, no index column. A matrix without columns is
// written as the single marker line "# rows=<n> cols=0".
inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  if (m.cols() == 0) return "# rows=" + std::to_string(m.rows()) + " cols=0\n";
  for (Index k = 0; k < m.cols(); ++k) {
    if (k) out += ',';
    out += std::to_string(k);
  }
  out += '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (k) out += ',';
      out += format_double(m(i, k));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(where + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#", 0) == 0) {
    long long rows = -1;
    if (std::sscanf(line.c_str(), "# rows=%lld cols=0", &rows) != 1 || rows < 0)
      throw InvalidArgument(where + ": bad empty-matrix marker");
    return Matrix(rows, 0);
  }
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  const std::size_t cols = split(line).size();
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols)
      throw InvalidArgument(where + ": line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(cols));
    std::vector<double> row;
    row.reserve(cols);
    for (const auto& c : cells) row.push_back(parse_double(c, where));
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  return m;
}

inline void write_matrix_csv(const fs::path& path, const Matrix& m) {
  write_text(path, matrix_to_csv(m));
}

inline Matrix read_matrix_csv(const fs::path& path) {
  return matrix_from_csv(read_text(path), path.string());
}

inline Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- JSON schemas --------------------------------------------------------

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline Json to_json(const SpikeSlabParams& s) {
  return {{"rate_spike", s.rate_spike}, {"rate_slab", s.rate_slab}, {"mix_weight", s.mix_weight}};
}

inline SpikeSlabParams spike_slab_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("spike-and-slab params must be an object");
  SpikeSlabParams s;
  s.rate_spike = detail::get_or(j, "rate_spike", s.rate_spike);
  s.rate_slab = detail::get_or(j, "rate_slab", s.rate_slab);
  s.mix_weight = detail::get_or(j, "mix_weight", s.mix_weight);
  return s;
}

inline Json to_json(const Hyperparameters& hp) {
  return {{"beta_prior", to_json(hp.beta_prior())},
          {"omega_prior", to_json(hp.omega_prior())},
          {"tau", hp.tau()},
          {"delta_beta", hp.delta_beta()},
          {"delta_omega", hp.delta_omega()}};
}

// delta_beta / delta_omega are derived and ignored on input.
inline Hyperparameters hyperparameters_from_json(const Json& j) {
  if (!j.contains("beta_prior") || !j.contains("omega_prior"))
    throw InvalidArgument("hyperparameters need beta_prior and omega_prior");
  return {spike_slab_from_json(j.at("beta_prior")), spike_slab_from_json(j.at("omega_prior")),
          detail::get_or(j, "tau", Hyperparameters::kDefaultTau)};
}

inline Json to_json(const TuningKnobs& k) {
  return {{"a_prime", k.a_prime},       {"b_prime", k.b_prime},     {"a_omega", k.a_omega},
          {"b_omega", k.b_omega},       {"c_theta_odds", k.c_theta_odds},
          {"c_lambda0", k.c_lambda0},   {"c_lambda1", k.c_lambda1}, {"c_eta_odds", k.c_eta_odds},
          {"c_xi0", k.c_xi0},           {"c_xi1", k.c_xi1}};
}

inline TuningKnobs knobs_from_json(const Json& j) {
  TuningKnobs k;
  if (!j.is_object()) throw InvalidArgument("knobs must be an object");
  k.a_prime = detail::get_or(j, "a_prime", k.a_prime);
  k.b_prime = detail::get_or(j, "b_prime", k.b_prime);
  k.a_omega = detail::get_or(j, "a_omega", k.a_omega);
  k.b_omega = detail::get_or(j, "b_omega", k.b_omega);
  k.c_theta_odds = detail::get_or(j, "c_theta_odds", k.c_theta_odds);
  k.c_lambda0 = detail::get_or(j, "c_lambda0", k.c_lambda0);
  k.c_lambda1 = detail::get_or(j, "c_lambda1", k.c_lambda1);
  k.c_eta_odds = detail::get_or(j, "c_eta_odds", k.c_eta_odds);
  k.c_xi0 = detail::get_or(j, "c_xi0", k.c_xi0);
  k.c_xi1 = detail::get_or(j, "c_xi1", k.c_xi1);
  k.validate();
  return k;
}

inline Json ladder_to_json(const std::vector<SpikeRates>& ladder) {
  Json arr = Json::array();
  for (const auto& r : ladder) arr.push_back({{"lambda0", r.lambda0}, {"xi0", r.xi0}});
  return arr;
}

inline std::vector<SpikeRates> ladder_from_json(const Json& j) {
  const Json& arr = j.is_object() && j.contains("ladder") ? j.at("ladder") : j;
  if (!arr.is_array()) throw InvalidArgument("ladder must be an array of {lambda0, xi0}");
  std::vector<SpikeRates> out;
  for (const auto& e : arr) {
    if (!e.is_object()) throw InvalidArgument("ladder entries must be objects");
    out.push_back({detail::get_or(e, "lambda0", 0.0), detail::get_or(e, "xi0", 0.0)});
  }
  return out;
}

inline Json to_json(const SolverConfig& s) {
  Json j = {{"tol", s.tol},
            {"max_outer_iters", s.max_outer_iters},
            {"max_inner_sweeps", s.max_inner_sweeps},
            {"tau", s.tau}};
  if (!s.ladder.empty()) j["ladder"] = ladder_to_json(s.ladder);
  return j;
}

inline SolverConfig solver_from_json(const Json& j) {
  SolverConfig s;
  if (!j.is_object()) throw InvalidArgument("solver must be an object");
  s.tol = detail::get_or(j, "tol", s.tol);
  s.max_outer_iters = detail::get_or(j, "max_outer_iters", s.max_outer_iters);
  s.max_inner_sweeps = detail::get_or(j, "max_inner_sweeps", s.max_inner_sweeps);
  s.tau = detail::get_or(j, "tau", s.tau);
  if (j.contains("ladder")) s.ladder = ladder_from_json(j.at("ladder"));
  s.validate();
  return s;
}

inline Json to_json(const GenConfig& g) {
  return {{"n", g.n},         {"p", g.p},   {"q", g.q},   {"s0B", g.s0B},
          {"s0Omega", g.s0Omega}, {"a1", g.a1}, {"b1", g.b1}, {"b2", g.b2},
          {"signal_floor", g.signal_floor}, {"seed", g.seed}};
}

inline GenConfig gen_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("generation config must be an object");
  GenConfig g;
  g.n = detail::get_or<Index>(j, "n", g.n);
  g.p = detail::get_or<Index>(j, "p", g.p);
  g.q = detail::get_or<Index>(j, "q", g.q);
  g.s0B = detail::get_or<Index>(j, "s0B", g.s0B);
  g.s0Omega = detail::get_or<Index>(j, "s0Omega", g.s0Omega);
  g.a1 = detail::get_or(j, "a1", g.a1);
  g.b1 = detail::get_or(j, "b1", g.b1);
  g.b2 = detail::get_or(j, "b2", g.b2);
  g.signal_floor = detail::get_or(j, "signal_floor", g.signal_floor);
  g.seed = detail::get_or<std::uint64_t>(j, "seed", g.seed);
  return g;
}

inline const char* to_string(ComparisonMode m) {
  switch (m) {
    case ComparisonMode::kMsslOnly: return "mssl-only";
    case ComparisonMode::kVsSeparateSsl: return "vs-separate-ssl";
    case ComparisonMode::kGraphicalOnly: return "graphical-only";
  }
  return "mssl-only";
}

inline ComparisonMode comparison_mode_from_string(const std::string& s) {
  if (s == "mssl-only") return ComparisonMode::kMsslOnly;
  if (s == "vs-separate-ssl") return ComparisonMode::kVsSeparateSsl;
  if (s == "graphical-only") return ComparisonMode::kGraphicalOnly;
  throw InvalidArgument("unknown comparison_mode '" + s + "'");
}

inline Json to_json(const ExperimentPlan& p) {
  return {{"base", to_json(p.base)},
          {"n_grid", p.n_grid},
          {"replicates", p.replicates},
          {"knobs", to_json(p.knobs)},
          {"solver", to_json(p.solver)},
          {"comparison_mode", to_string(p.comparison_mode)}};
}

inline ExperimentPlan plan_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("plan must be an object");
  ExperimentPlan p;
  if (j.contains("base")) p.base = gen_config_from_json(j.at("base"));
  p.n_grid = detail::get_or(j, "n_grid", p.n_grid);
  p.replicates = detail::get_or(j, "replicates", p.replicates);
  if (j.contains("knobs")) p.knobs = knobs_from_json(j.at("knobs"));
  if (j.contains("solver")) p.solver = solver_from_json(j.at("solver"));
  p.comparison_mode =
      comparison_mode_from_string(detail::get_or<std::string>(j, "comparison_mode", "mssl-only"));
  return p;
}

// ---- Experiment outputs --------------------------------------------------

inline std::string records_csv(const ExperimentReport& report) {
  std::string out = "n,replicate,method,ok";
  for (const auto& name : metric_names()) out += "," + name;
  out += ",phi_exact,converged,floor_projection_applied,error\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.n) + "," + std::to_string(c.replicate) + "," + to_string(c.method) +
           "," + (c.ok ? "1" : "0");
    for (const auto& name : metric_names())
      out += "," + (c.ok ? format_double(metric_value(c, name)) : std::string("nan"));
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
    out += std::string(",") + (c.phi_exact ? "1" : "0") + "," + (c.converged ? "1" : "0") + "," +
           (c.floor_projection_applied ? "1" : "0") + "," + err + "\n";
  }
  return out;
}

inline std::string rate_curve_csv(const ExperimentReport& report) {
  std::string out = "method,n,eps_n,median_omega_error,median_xb_error,median_b_error,median_psi_error\n";
  for (const auto& s : report.summaries) {
    const auto get = [&](const char* k) { return format_double(s.medians.at(k)); };
    out += std::string(to_string(s.method)) + "," + std::to_string(s.n) + "," + get("eps_n") + "," +
           get("omega_error") + "," + get("xb_error") + "," + get("b_error") + "," +
           get("psi_error") + "\n";
  }
  return out;
}

namespace detail {
inline Json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
}  // namespace detail

inline Json summary_json(const ExperimentReport& report) {
  Json per_n = Json::array();
  for (const auto& s : report.summaries) {
    Json med = Json::object();
    for (const auto& name : metric_names()) med[name] = detail::number_or_null(s.medians.at(name));
    per_n.push_back({{"method", to_string(s.method)},
                     {"n", s.n},
                     {"cells", s.cells},
                     {"failures", s.failures},
                     {"medians", med}});
  }
  Json slopes = Json::object();
  for (const auto& [m, sl] : report.slopes)
    slopes[to_string(m)] = {{"omega_slope", detail::optional_number(sl.omega_slope)},
                            {"xb_slope", detail::optional_number(sl.xb_slope)}};
  const RateSlopes main = report.slopes.count(Method::kMssl) ? report.slopes.at(Method::kMssl)
                                                             : RateSlopes{};
  return {{"config", to_json(report.plan)},
          {"seed", report.plan.base.seed},
          {"cells", report.cells.size()},
          {"failures", report.failures},
          {"omega_slope", detail::optional_number(main.omega_slope)},
          {"xb_slope", detail::optional_number(main.xb_slope)},
          {"slopes", slopes},
          {"per_n", per_n}};
}

}  // namespace mssl

#endif  // MSSL_IO_HPP_
