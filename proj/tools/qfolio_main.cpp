// Batch front-end: ingest or synthesize prices, run the classical and quantum
// solvers, and emit frontier curves, diagnostics and verification reports.

#include "qfolio/hhl.hpp"
#include "qfolio/json_io.hpp"
#include "qfolio/market_data.hpp"
#include "qfolio/portfolio_qp.hpp"
#include "qfolio/readout.hpp"
#include "qfolio/state_prep.hpp"
#include "qfolio/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace qfolio;

struct RunConfig {
  std::string input;       // CSV path; mutually exclusive with synthetic
  std::string synthetic;   // "assets=8,times=64,factors=2,loadings=0.02,idio=0.005"
  int dt_period = 1;
  std::string budget_mode = "unit";
  double mu_min = 0.0, mu_max = 0.0;
  int mu_steps = 5;
  std::optional<double> mu_single;
  double xi = 1.0;
  double kappa = 32.0;
  int phase_bits = 10;
  std::string backend = "exact";
  std::optional<double> t0;
  std::uint64_t shots = 0;  // 0 = exact readout
  std::uint64_t samples = 10000;
  std::uint64_t seed = 7;
  std::string out_dir = "out";
  bool mu_range_set = false;
};

std::map<std::string, std::string> parse_kv(const std::string& text, char sep) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.empty() || item[0] == '#') continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got: " + item);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      const auto e = s.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return kv;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  for (const auto& [key, value] : parse_kv(buf.str(), '\n')) {
    if (key == "input") cfg.input = value;
    else if (key == "synthetic") cfg.synthetic = value;
    else if (key == "dt_period") cfg.dt_period = std::stoi(value);
    else if (key == "budget_mode") cfg.budget_mode = value;
    else if (key == "mu_min") { cfg.mu_min = std::stod(value); cfg.mu_range_set = true; }
    else if (key == "mu_max") { cfg.mu_max = std::stod(value); cfg.mu_range_set = true; }
    else if (key == "mu_steps") cfg.mu_steps = std::stoi(value);
    else if (key == "mu") cfg.mu_single = std::stod(value);
    else if (key == "xi") cfg.xi = std::stod(value);
    else if (key == "kappa") cfg.kappa = std::stod(value);
    else if (key == "phase_bits") cfg.phase_bits = std::stoi(value);
    else if (key == "backend") cfg.backend = value;
    else if (key == "t0") cfg.t0 = std::stod(value);
    else if (key == "shots") cfg.shots = std::stoull(value);
    else if (key == "samples") cfg.samples = std::stoull(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else throw std::invalid_argument("unknown config key: " + key);
  }
}

market::PriceSeries load_input(const RunConfig& cfg) {
  if (!cfg.input.empty() && !cfg.synthetic.empty())
    throw std::invalid_argument("--input and --synthetic are mutually exclusive");
  if (!cfg.input.empty()) return market::load_prices(cfg.input);
  if (cfg.synthetic.empty())
    throw std::invalid_argument("either --input or --synthetic is required");

  int assets = 8, times = 64;
  market::FactorModelSpec spec;
  spec.seed = cfg.seed;
  for (const auto& [key, value] : parse_kv(cfg.synthetic, ',')) {
    if (key == "assets") assets = std::stoi(value);
    else if (key == "times") times = std::stoi(value);
    else if (key == "factors") spec.n_factors = std::stoi(value);
    else if (key == "loadings") spec.loadings_scale = std::stod(value);
    else if (key == "idio") spec.idiosyncratic_scale = std::stod(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else throw std::invalid_argument("unknown synthetic key: " + key);
  }
  return market::generate_synthetic(spec, assets, times);
}

hhl::HHLConfig make_hhl_config(const RunConfig& cfg) {
  hhl::HHLConfig h;
  h.kappa = cfg.kappa;
  h.n_phase_bits = cfg.phase_bits;
  h.t0 = cfg.t0;
  h.seed = cfg.seed;
  if (cfg.backend == "exact") h.backend = hhl::Backend::exact;
  else if (cfg.backend == "trotter") h.backend = hhl::Backend::trotter;
  else if (cfg.backend == "density_exp") h.backend = hhl::Backend::density_exp;
  else throw std::invalid_argument("backend must be exact, trotter or density_exp");
  h.validate();
  return h;
}

qp::BudgetMode budget_mode(const RunConfig& cfg) {
  if (cfg.budget_mode == "unit") return qp::BudgetMode::unit;
  if (cfg.budget_mode == "prices") return qp::BudgetMode::prices;
  throw std::invalid_argument("budget_mode must be unit or prices");
}

nlohmann::json config_echo(const RunConfig& cfg) {
  nlohmann::json j = {{"dt_period", cfg.dt_period}, {"budget_mode", cfg.budget_mode},
                      {"xi", cfg.xi},               {"kappa", cfg.kappa},
                      {"phase_bits", cfg.phase_bits}, {"backend", cfg.backend},
                      {"shots", cfg.shots},         {"samples", cfg.samples},
                      {"seed", cfg.seed}};
  if (!cfg.input.empty()) j["input"] = cfg.input;
  if (!cfg.synthetic.empty()) j["synthetic"] = cfg.synthetic;
  if (cfg.mu_single) j["mu"] = *cfg.mu_single;
  if (cfg.mu_range_set) {
    j["mu_min"] = cfg.mu_min;
    j["mu_max"] = cfg.mu_max;
    j["mu_steps"] = cfg.mu_steps;
  }
  if (cfg.t0) j["t0"] = *cfg.t0;
  return j;
}

struct Pipeline {
  market::ReturnsPanel panel;
  Eigen::VectorXd prices_today;
  std::vector<double> mu_grid;
};

Pipeline prepare_pipeline(const RunConfig& cfg, bool need_grid) {
  const auto series = load_input(cfg);
  Pipeline p{market::compute_returns(series, cfg.dt_period),
             series.prices.col(series.n_times() - 1), {}};

  if (need_grid) {
    double lo = cfg.mu_min, hi = cfg.mu_max;
    if (!cfg.mu_range_set) {
      // default grid around the minimum-variance portfolio's return
      const Eigen::VectorXd budget = budget_mode(cfg) == qp::BudgetMode::unit
                                         ? Eigen::VectorXd::Ones(p.panel.n_assets()).eval()
                                         : p.prices_today;
      const Eigen::MatrixXd reg =
          p.panel.covariance +
          1e-10 * p.panel.covariance.trace() *
              Eigen::MatrixXd::Identity(p.panel.n_assets(), p.panel.n_assets());
      const Eigen::VectorXd w_gmv = reg.ldlt().solve(budget);
      const double mu0 =
          p.panel.expected_return.dot(w_gmv * (cfg.xi / budget.dot(w_gmv)));
      lo = mu0 * 0.8;
      hi = mu0 * 1.2;
      if (mu0 == 0.0) {
        lo = -0.01;
        hi = 0.01;
      }
    }
    if (cfg.mu_steps < 1) throw std::invalid_argument("mu_steps must be >= 1");
    for (int i = 0; i < cfg.mu_steps; ++i)
      p.mu_grid.push_back(cfg.mu_steps == 1
                              ? lo
                              : lo + (hi - lo) * static_cast<double>(i) / (cfg.mu_steps - 1));
  }
  return p;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

int cmd_frontier(const RunConfig& cfg) {
  const Pipeline p = prepare_pipeline(cfg, /*need_grid=*/true);
  ensure_out_dir(cfg);

  const auto mode = budget_mode(cfg);
  const auto hcfg = make_hhl_config(cfg);
  const auto qf = readout::frontier_quantum(p.panel.expected_return, p.prices_today,
                                            p.panel.covariance, p.mu_grid, cfg.xi, mode, hcfg,
                                            cfg.shots);

  nlohmann::json frontier_json = io::to_json(qf);
  frontier_json["config"] = config_echo(cfg);
  io::write_file(out_path(cfg, "frontier.csv"), io::frontier_csv(qf));
  io::write_file(out_path(cfg, "frontier.json"), frontier_json.dump(2) + "\n");

  nlohmann::json diag = {{"schema_version", io::kSchemaVersion},
                         {"config", config_echo(cfg)},
                         {"points", nlohmann::json::array()},
                         {"warnings", qf.warnings}};
  for (const auto& pt : qf.points)
    diag["points"].push_back({{"mu", pt.mu},
                              {"fidelity", pt.fidelity},
                              {"p_w", pt.p_w},
                              {"epsilon_kappa", pt.epsilon_kappa},
                              {"projection_probability", pt.projection_probability}});
  io::write_file(out_path(cfg, "diagnostics.json"), diag.dump(2) + "\n");

  std::cout << "frontier: " << qf.points.size() << " points, " << qf.warnings.size()
            << " omitted -> " << cfg.out_dir << "\n";
  return qf.warnings.empty() ? 0 : 2;
}

int cmd_solve(const RunConfig& cfg) {
  if (!cfg.mu_single) throw std::invalid_argument("solve requires --mu");
  const Pipeline p = prepare_pipeline(cfg, /*need_grid=*/false);
  ensure_out_dir(cfg);

  const auto mode = budget_mode(cfg);
  const Eigen::VectorXd budget =
      mode == qp::BudgetMode::unit ? Eigen::VectorXd::Ones(p.panel.n_assets()).eval()
                                   : p.prices_today;
  const auto kkt = qp::build_kkt(p.panel.expected_return, p.prices_today, p.panel.covariance,
                                 *cfg.mu_single, cfg.xi, mode);
  const auto classical = qp::solve_exact(kkt);
  const auto hcfg = make_hhl_config(cfg);
  const auto hr = hhl::hhl_solve(kkt, hcfg);
  const auto [w_state, proj] = hhl::extract_w(hr);

  nlohmann::json result = io::to_json(hr);
  result["config"] = config_echo(cfg);
  result["projection_probability"] = proj;
  {
    nlohmann::json wcl = nlohmann::json::array();
    for (int i = 0; i < classical.weights.size(); ++i) wcl.push_back(classical.weights(i));
    result["classical_weights"] = wcl;
    result["classical_risk"] = classical.risk;

    Eigen::VectorXcd w_cl = Eigen::VectorXcd::Zero(w_state.layout().dim());
    w_cl.head(classical.weights.size()) =
        (classical.weights / classical.weights.norm()).cast<std::complex<double>>();
    result["fidelity"] = std::norm(w_cl.dot(w_state.amplitudes()));
  }
  io::write_file(out_path(cfg, "solution.json"), result.dump(2) + "\n");

  const auto sampling = readout::sample_portfolio(w_state, p.panel.expected_return, cfg.samples,
                                                  cfg.seed, &p.panel.covariance);
  Eigen::VectorXd w_oracle(p.panel.n_assets());
  for (int i = 0; i < w_oracle.size(); ++i) w_oracle(i) = w_state.amplitudes()(i).real();
  const auto report = readout::sampling_error_report(sampling, w_oracle, p.panel.covariance);

  nlohmann::json portfolio = io::to_json(sampling);
  portfolio["error_report"] = io::to_json(report);
  portfolio["config"] = config_echo(cfg);
  io::write_file(out_path(cfg, "portfolio.json"), portfolio.dump(2) + "\n");

  std::cout << "solve: fidelity " << result["fidelity"] << ", p_w " << hr.p_w << " -> "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  verify::VerifyConfig vcfg;
  vcfg.seed = cfg.seed;
  vcfg.hhl_phase_bits = cfg.phase_bits;
  const auto results = verify::run_all(vcfg, &std::cout);
  io::write_file(out_path(cfg, "verify_report.json"),
                 verify::report_json(results, vcfg).dump(2) + "\n");
  return verify::all_passed(results) ? 0 : 1;
}

int cmd_prep_demo(const RunConfig& cfg) {
  const Pipeline p = prepare_pipeline(cfg, /*need_grid=*/false);
  ensure_out_dir(cfg);

  const auto chi = prep::prepare_chi(p.panel);
  const auto chi_tilde = prep::prepare_chi_tilde(p.panel);
  const auto rho = prep::covariance_density(chi_tilde);

  nlohmann::json j = {{"schema_version", io::kSchemaVersion},
                      {"config", config_echo(cfg)},
                      {"chi",
                       {{"state", io::to_json(chi.state)},
                        {"success_probability", chi.success_probability},
                        {"delta", chi.delta_used}}},
                      {"chi_tilde",
                       {{"state", io::to_json(chi_tilde.state)},
                        {"success_probability", chi_tilde.success_probability},
                        {"delta", chi_tilde.delta_used}}},
                      {"covariance_density", io::to_json(rho)}};
  io::write_file(out_path(cfg, "prep_demo.json"), j.dump(2) + "\n");
  std::cout << "prep-demo: P_chi " << chi.success_probability << ", P_chi_tilde "
            << chi_tilde.success_probability << " -> " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* cap = std::getenv("QFOLIO_QUBIT_CAP")) {
    try {
      qsim::set_default_qubit_cap(std::stoi(cap));
    } catch (const std::exception& e) {
      std::cerr << "invalid QFOLIO_QUBIT_CAP: " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"qfolio: quantum portfolio-optimization simulator"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file (flags override)");

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "CSV price file (time,<asset>...)");
    sub->add_option("--synthetic", cfg.synthetic,
                    "synthetic spec: assets=,times=,factors=,loadings=,idio=,seed=");
    sub->add_option("--dt-period", cfg.dt_period, "return period in ticks");
    sub->add_option("--budget-mode", cfg.budget_mode, "unit | prices");
    sub->add_option("--xi", cfg.xi, "total wealth");
    sub->add_option("--kappa", cfg.kappa, "condition cutoff");
    sub->add_option("--phase-bits", cfg.phase_bits, "phase-estimation bits [3,12]");
    sub->add_option("--backend", cfg.backend, "exact | trotter | density_exp");
    sub->add_option("--t0", cfg.t0, "base evolution time (default: auto)");
    sub->add_option("--shots", cfg.shots, "readout shots (0 = exact)");
    sub->add_option("--samples", cfg.samples, "portfolio samples M (solve)");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
  };

  auto* frontier = app.add_subcommand("frontier", "risk-return curve, classical vs quantum");
  add_common(frontier);
  auto* opt_min = frontier->add_option("--mu-min", cfg.mu_min, "grid lower bound");
  auto* opt_max = frontier->add_option("--mu-max", cfg.mu_max, "grid upper bound");
  frontier->add_option("--mu-steps", cfg.mu_steps, "grid size");

  auto* solve = app.add_subcommand("solve", "single-target solve with sampled portfolio");
  add_common(solve);
  solve->add_option("--mu", cfg.mu_single, "target return");

  auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
  add_common(verify);

  auto* prep_demo = app.add_subcommand("prep-demo", "dump |chi>, |chi~> and rho for a panel");
  add_common(prep_demo);

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) {
      // flags win: re-parse after the file seeds the defaults
      RunConfig file_cfg;
      apply_config_file(file_cfg, config_path);
      std::swap(cfg, file_cfg);
      app.clear();
      app.parse(argc, argv);
    }
    if (opt_min->count() || opt_max->count()) cfg.mu_range_set = true;

    if (frontier->parsed()) return cmd_frontier(cfg);
    if (solve->parsed()) return cmd_solve(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
    if (prep_demo->parsed()) return cmd_prep_demo(cfg);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
