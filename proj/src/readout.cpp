#include "qfolio/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace qfolio::readout {

using qsim::DensityMatrix;
using qsim::QuantumState;

namespace {

SwapTestEstimate finish_swap_test(double fidelity, std::uint64_t shots, std::uint64_t seed) {
  const double p = 0.5 * (1.0 + fidelity);
  SwapTestEstimate est;
  est.shots = shots;
  if (shots == 0) {
    est.acceptance_probability = p;
    est.overlap = std::clamp(fidelity, 0.0, 1.0);
    est.std_error = 0.0;
    return est;
  }
  std::mt19937_64 rng(seed);
  std::binomial_distribution<std::uint64_t> binom(shots, p);
  const double p_hat = static_cast<double>(binom(rng)) / static_cast<double>(shots);
  est.acceptance_probability = p_hat;
  est.overlap = std::clamp(2.0 * p_hat - 1.0, 0.0, 1.0);
  est.std_error = 2.0 * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(shots));
  return est;
}

void check_dims(std::uint64_t a, std::uint64_t b) {
  if (a != b) throw std::invalid_argument("swap test operands must have equal dimension");
}

}  // namespace

SwapTestEstimate swap_test(const QuantumState& a, const QuantumState& b, std::uint64_t shots,
                           std::uint64_t seed) {
  check_dims(a.layout().dim(), b.layout().dim());
  const double f = std::norm(a.amplitudes().dot(b.amplitudes()));
  return finish_swap_test(f, shots, seed);
}

SwapTestEstimate swap_test(const QuantumState& a, const DensityMatrix& b, std::uint64_t shots,
                           std::uint64_t seed) {
  check_dims(a.layout().dim(), b.layout().dim());
  const double f = (a.amplitudes().adjoint() * b.matrix() * a.amplitudes())(0, 0).real();
  return finish_swap_test(f, shots, seed);
}

SwapTestEstimate swap_test(const DensityMatrix& a, const DensityMatrix& b, std::uint64_t shots,
                           std::uint64_t seed) {
  check_dims(a.layout().dim(), b.layout().dim());
  const double f = (a.matrix() * b.matrix()).trace().real();
  return finish_swap_test(f, shots, seed);
}

double risk_estimate(const QuantumState& w_state, const DensityMatrix& rho_sigma,
                     double trace_sigma, std::uint64_t shots, std::uint64_t seed) {
  if (!(trace_sigma > 0.0)) throw std::invalid_argument("trace_sigma must be positive");
  return trace_sigma * swap_test(w_state, rho_sigma, shots, seed).overlap;
}

double sector_weight(const QuantumState& w_state, const std::vector<int>& sector_mask,
                     std::uint64_t shots, std::uint64_t seed) {
  if (sector_mask.empty()) throw std::invalid_argument("sector mask must be non-empty");
  const std::uint64_t dim = w_state.layout().dim();
  for (int j : sector_mask)
    if (j < 0 || static_cast<std::uint64_t>(j) >= dim)
      throw std::invalid_argument("sector mask index out of range");

  if (shots == 0) {
    double acc = 0.0;
    for (int j : sector_mask) acc += std::norm(w_state.amplitudes()(j));
    return acc;
  }
  const std::string reg = w_state.layout().registers().front().name;
  const auto hist = qsim::measure_samples(w_state, reg, shots, seed);
  std::uint64_t in_mask = 0;
  for (int j : sector_mask) {
    const auto it = hist.find(static_cast<std::uint64_t>(j));
    if (it != hist.end()) in_mask += it->second;
  }
  return static_cast<double>(in_mask) / static_cast<double>(shots);
}

ComparisonResult compare_portfolio(const QuantumState& w_state, const QuantumState& candidate,
                                   std::uint64_t shots, double threshold, std::uint64_t seed) {
  ComparisonResult r;
  r.estimate = swap_test(w_state, candidate, shots, seed);
  r.accepted = r.estimate.overlap >= threshold;
  return r;
}

SamplingResult sample_portfolio(const QuantumState& w_state, const Eigen::VectorXd& r_vector,
                                std::uint64_t m_samples, std::uint64_t seed,
                                const Eigen::MatrixXd* sigma) {
  if (m_samples < 1) throw std::invalid_argument("m_samples must be >= 1");
  const int n = static_cast<int>(r_vector.size());
  if (static_cast<std::uint64_t>(n) > w_state.layout().dim())
    throw std::invalid_argument("r_vector longer than state dimension");

  const std::string reg = w_state.layout().registers().front().name;
  SamplingResult res;
  res.counts = qsim::measure_samples(w_state, reg, m_samples, seed);
  res.total = m_samples;

  res.w_prime = Eigen::VectorXd::Zero(n);
  for (const auto& [idx, count] : res.counts) {
    if (idx >= static_cast<std::uint64_t>(n))
      throw std::runtime_error("sampled index beyond the asset range");
    const double sign = r_vector(idx) < 0.0 ? -1.0 : 1.0;
    res.w_prime(idx) = sign * std::sqrt(static_cast<double>(count) / static_cast<double>(m_samples));
  }

  // Z estimator over the kept samples; R_j = 0 samples are dropped and counted.
  double z_sum = 0.0, z2_sum = 0.0;
  std::uint64_t kept = 0;
  for (const auto& [idx, count] : res.counts) {
    if (r_vector(idx) == 0.0) {
      res.dropped += count;
      continue;
    }
    const double z = r_vector(idx) / res.w_prime(idx);
    z_sum += static_cast<double>(count) * z;
    z2_sum += static_cast<double>(count) * z * z;
    kept += count;
  }
  res.est_return = kept > 0 ? z_sum / static_cast<double>(kept) : 0.0;
  res.est_return_second_moment = kept > 0 ? z2_sum / static_cast<double>(kept) : 0.0;

  res.sigma_j = Eigen::VectorXd::Zero(n);
  for (const auto& [idx, count] : res.counts) {
    const double p = static_cast<double>(count) / static_cast<double>(m_samples);
    res.sigma_j(idx) = std::sqrt(p * (1.0 - p) / static_cast<double>(m_samples));
  }

  if (sigma != nullptr) {
    if (sigma->rows() != n || sigma->cols() != n)
      throw std::invalid_argument("sigma dimension mismatch");
    Eigen::VectorXd w(n);
    for (int j = 0; j < n; ++j) {
      const std::complex<double> amp = w_state.amplitudes()(j);
      if (std::abs(amp.imag()) > 1e-9)
        throw std::invalid_argument("oracle portfolio state must be real");
      w(j) = amp.real();
    }
    res.excess_risk = qp::portfolio_risk(res.w_prime, *sigma) - qp::portfolio_risk(w, *sigma);
  } else {
    res.excess_risk = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

SamplingErrorReport sampling_error_report(const SamplingResult& result,
                                          const Eigen::VectorXd& oracle_w,
                                          const Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(oracle_w.size());
  if (result.w_prime.size() != n || sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("dimension mismatch");

  SamplingErrorReport rep;
  rep.epsilon_w = (oracle_w - result.w_prime).norm();
  rep.risk_w = qp::portfolio_risk(oracle_w, sigma);
  rep.risk_w_prime = qp::portfolio_risk(result.w_prime, sigma);
  rep.bound = 2.0 * hsim::operator_norm(sigma.cast<std::complex<double>>()) * rep.epsilon_w;
  rep.bound_satisfied = std::abs(rep.risk_w_prime - rep.risk_w) <= rep.bound + 1e-10;
  rep.sigma_j = result.sigma_j;
  return rep;
}

QuantumFrontier frontier_quantum(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                                 const Eigen::MatrixXd& sigma, const std::vector<double>& mu_grid,
                                 double xi, qp::BudgetMode budget_mode, const hhl::HHLConfig& cfg,
                                 std::uint64_t shots) {
  if (mu_grid.empty()) throw std::invalid_argument("mu grid must be non-empty");

  const int n = static_cast<int>(r.size());
  const int qw = qsim::ceil_log2(static_cast<std::uint64_t>(n));
  const double trace_sigma = sigma.trace();

  // Normalized covariance density on the asset register, zero-padded.
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(Eigen::Index{1} << qw, Eigen::Index{1} << qw);
  rho.topLeftCorner(n, n) = (sigma / trace_sigma).cast<std::complex<double>>();
  const DensityMatrix rho_sigma(qsim::RegisterLayout{{"w", qw}}, std::move(rho),
                                DensityMatrix::Unchecked{});

  QuantumFrontier out;
  std::uint64_t point_seed = cfg.seed;
  for (double mu : mu_grid) {
    ++point_seed;
    try {
      const qp::KKTSystem kkt = qp::build_kkt(r, pi, sigma, mu, xi, budget_mode);
      const qp::PortfolioSolution classical = qp::solve_exact(kkt);
      const hhl::HHLResult hr = hhl::hhl_solve(kkt, cfg);
      const auto [w_state, proj_prob] = hhl::extract_w(hr);

      const double overlap = risk_estimate(w_state, rho_sigma, 1.0, shots, point_seed);
      const double chain = hr.rescale / (trace_sigma * trace_sigma);
      const double risk_quantum = chain * chain * proj_prob * trace_sigma * overlap;

      QuantumFrontierPoint p;
      p.mu = mu;
      p.risk_classical = classical.risk;
      p.risk_quantum = risk_quantum;
      p.p_w = hr.p_w;
      p.epsilon_kappa = hr.epsilon_kappa;
      p.projection_probability = proj_prob;

      Eigen::VectorXcd w_cl = Eigen::VectorXcd::Zero(w_state.layout().dim());
      w_cl.head(n) = (classical.weights / classical.weights.norm()).cast<std::complex<double>>();
      p.fidelity = std::norm(w_cl.dot(w_state.amplitudes()));

      out.points.push_back(p);
    } catch (const std::exception& e) {
      out.warnings.push_back("mu=" + std::to_string(mu) + " omitted: " + e.what());
    }
  }
  return out;
}

}  // namespace qfolio::readout
