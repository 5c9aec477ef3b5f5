#include "qfolio/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qfolio::io {

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json complex_vector_json(const Eigen::VectorXcd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i)
    out.push_back(nlohmann::json::array({v(i).real(), v(i).imag()}));
  return out;
}

nlohmann::json layout_json(const qsim::RegisterLayout& layout) {
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& r : layout.registers())
    regs.push_back({{"name", r.name}, {"qubits", r.n_qubits}});
  return regs;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* backend_name(hhl::Backend b) {
  switch (b) {
    case hhl::Backend::exact: return "exact";
    case hhl::Backend::trotter: return "trotter";
    case hhl::Backend::density_exp: return "density_exp";
  }
  return "unknown";
}

}  // namespace

nlohmann::json to_json(const market::ReturnsPanel& panel) {
  return {{"schema_version", kSchemaVersion},
          {"returns", matrix_json(panel.returns)},
          {"expected_return", vector_json(panel.expected_return)},
          {"covariance", matrix_json(panel.covariance)},
          {"norms",
           {{"y", panel.norm_y}, {"y_prime", panel.norm_y_prime}, {"y_tilde", panel.norm_y_tilde}}}};
}

nlohmann::json to_json(const qp::FrontierCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points)
    points.push_back({{"mu", p.mu}, {"risk", p.min_risk}, {"weights", vector_json(p.weights)}});
  return {{"schema_version", kSchemaVersion}, {"points", points}, {"warnings", curve.warnings}};
}

nlohmann::json to_json(const prep::KPTree& tree) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : tree.levels) levels.push_back(level);
  return {{"schema_version", kSchemaVersion},
          {"depth", tree.depth},
          {"n_values", tree.n_values},
          {"levels", levels},
          {"leaf_signs", tree.leaf_signs}};
}

nlohmann::json to_json(const qsim::QuantumState& state) {
  return {{"schema_version", kSchemaVersion},
          {"layout", layout_json(state.layout())},
          {"amplitudes", complex_vector_json(state.amplitudes())}};
}

nlohmann::json to_json(const qsim::DensityMatrix& dm) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < dm.matrix().rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < dm.matrix().cols(); ++j)
      row.push_back(nlohmann::json::array({dm.matrix()(i, j).real(), dm.matrix()(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return {{"schema_version", kSchemaVersion},
          {"layout", layout_json(dm.layout())},
          {"matrix", rows},
          {"purity", dm.purity()}};
}

nlohmann::json to_json(const hhl::HHLResult& result) {
  nlohmann::json spectrum = nlohmann::json::array();
  for (const auto& e : result.spectrum)
    spectrum.push_back({{"lambda", e.lambda}, {"beta", e.beta}});
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"fidelity_vs_oracle", result.fidelity_vs_oracle},
                      {"p_w", result.p_w},
                      {"rescale", result.rescale},
                      {"spectrum", spectrum},
                      {"epsilon_kappa", result.epsilon_kappa},
                      {"phase_cleanup_probability", result.phase_cleanup_probability},
                      {"solution_purity", result.solution_purity},
                      {"solution_state", complex_vector_json(result.solution_state.amplitudes())},
                      {"config",
                       {{"t0", result.t0_used},
                        {"n_phase_bits", result.n_phase_bits},
                        {"backend", backend_name(result.backend)},
                        {"kappa", result.kappa},
                        {"c_constant", result.c_used},
                        {"mu", result.mu},
                        {"xi", result.xi},
                        {"trace_sigma", result.trace_sigma},
                        {"n_assets", result.n_assets}}}};
  if (result.aliasing_warning) j["aliasing_warning"] = *result.aliasing_warning;
  return j;
}

nlohmann::json to_json(const readout::SwapTestEstimate& est) {
  return {{"schema_version", kSchemaVersion},
          {"overlap", est.overlap},
          {"shots", est.shots},
          {"std_error", est.std_error},
          {"acceptance_probability", est.acceptance_probability}};
}

nlohmann::json to_json(const readout::SamplingResult& result) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [idx, c] : result.counts) counts[std::to_string(idx)] = c;
  return {{"schema_version", kSchemaVersion},
          {"counts", counts},
          {"total", result.total},
          {"dropped", result.dropped},
          {"w_prime", vector_json(result.w_prime)},
          {"est_return", result.est_return},
          {"est_return_second_moment", result.est_return_second_moment},
          {"excess_risk", result.excess_risk},
          {"sigma_j", vector_json(result.sigma_j)}};
}

nlohmann::json to_json(const readout::SamplingErrorReport& report) {
  return {{"schema_version", kSchemaVersion},
          {"epsilon_w", report.epsilon_w},
          {"risk_w", report.risk_w},
          {"risk_w_prime", report.risk_w_prime},
          {"bound", report.bound},
          {"bound_satisfied", report.bound_satisfied},
          {"sigma_j", vector_json(report.sigma_j)}};
}

nlohmann::json to_json(const readout::QuantumFrontier& frontier) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : frontier.points)
    points.push_back({{"mu", p.mu},
                      {"risk_classical", p.risk_classical},
                      {"risk_quantum", p.risk_quantum},
                      {"fidelity", p.fidelity},
                      {"p_w", p.p_w},
                      {"epsilon_kappa", p.epsilon_kappa},
                      {"projection_probability", p.projection_probability}});
  return {{"schema_version", kSchemaVersion}, {"points", points}, {"warnings", frontier.warnings}};
}

std::string frontier_csv(const qp::FrontierCurve& curve) {
  std::string out = "mu,risk\n";
  for (const auto& p : curve.points)
    out += format_double(p.mu) + "," + format_double(p.min_risk) + "\n";
  return out;
}

std::string frontier_csv(const readout::QuantumFrontier& frontier) {
  std::string out = "mu,risk_classical,risk_quantum,fidelity\n";
  for (const auto& p : frontier.points)
    out += format_double(p.mu) + "," + format_double(p.risk_classical) + "," +
           format_double(p.risk_quantum) + "," + format_double(p.fidelity) + "\n";
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f << content;
}

}  // namespace qfolio::io
