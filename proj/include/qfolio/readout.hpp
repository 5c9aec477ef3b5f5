#pragma once

#include "qfolio/hhl.hpp"
#include "qfolio/portfolio_qp.hpp"
#include "qfolio/qsim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qfolio::readout {

/// Swap-test overlap estimate. shots = 0 is the exact-mode sentinel: the
/// analytic acceptance probability (1 + F)/2 is returned without sampling.
struct SwapTestEstimate {
  double overlap = 0.0;            // 2 p_hat - 1 clipped to [0, 1]
  std::uint64_t shots = 0;
  double std_error = 0.0;          // 2 sqrt(p_hat (1 - p_hat) / shots)
  double acceptance_probability = 0.0;
};

SwapTestEstimate swap_test(const qsim::QuantumState& a, const qsim::QuantumState& b,
                           std::uint64_t shots, std::uint64_t seed);
SwapTestEstimate swap_test(const qsim::QuantumState& a, const qsim::DensityMatrix& b,
                           std::uint64_t shots, std::uint64_t seed);
SwapTestEstimate swap_test(const qsim::DensityMatrix& a, const qsim::DensityMatrix& b,
                           std::uint64_t shots, std::uint64_t seed);

/// trace_sigma * overlap(w, Sigma/trSigma) = ⟨w|Σ|w⟩ of the normalized |w⟩.
/// Currency-unit risk additionally multiplies by the squared rescale chain,
/// (rescale / trSigma^2)^2 * projection_probability.
double risk_estimate(const qsim::QuantumState& w_state, const qsim::DensityMatrix& rho_sigma,
                     double trace_sigma, std::uint64_t shots, std::uint64_t seed);

/// Sum of |w_j|^2 over the masked assets (exact mode) or its shot estimate.
double sector_weight(const qsim::QuantumState& w_state, const std::vector<int>& sector_mask,
                     std::uint64_t shots, std::uint64_t seed);

struct ComparisonResult {
  SwapTestEstimate estimate;
  bool accepted = false;
};

ComparisonResult compare_portfolio(const qsim::QuantumState& w_state,
                                   const qsim::QuantumState& candidate, std::uint64_t shots,
                                   double threshold, std::uint64_t seed);

struct SamplingResult {
  std::map<std::uint64_t, std::uint64_t> counts;  // index -> M_j (zero bins absent)
  std::uint64_t total = 0;                        // M
  std::uint64_t dropped = 0;                      // samples with R_j = 0
  Eigen::VectorXd w_prime;                        // sgn(R_j) sqrt(M_j / M)
  double est_return = 0.0;                        // mean of Z = R_j / w'_j
  double est_return_second_moment = 0.0;
  double excess_risk = 0.0;   // w'ᵀΣw' - wᵀΣw; NaN when sigma not supplied
  Eigen::VectorXd sigma_j;    // sqrt((M_j/M)(1 - M_j/M)/M)
};

/// Long/short sampling estimator: draws m_samples indices from |w_j|^2 and
/// reconstructs the signed sparse portfolio via the sign of R_j (sign +1 where
/// R_j = 0; such samples are dropped from the Z estimator and counted).
SamplingResult sample_portfolio(const qsim::QuantumState& w_state, const Eigen::VectorXd& r_vector,
                                std::uint64_t m_samples, std::uint64_t seed,
                                const Eigen::MatrixXd* sigma = nullptr);

struct SamplingErrorReport {
  double epsilon_w = 0.0;      // ||w - w'||_2
  double risk_w = 0.0;         // wᵀΣw
  double risk_w_prime = 0.0;   // w'ᵀΣw'
  double bound = 0.0;          // 2 ||Σ||_2 epsilon_w
  bool bound_satisfied = false;
  Eigen::VectorXd sigma_j;
};

SamplingErrorReport sampling_error_report(const SamplingResult& result,
                                          const Eigen::VectorXd& oracle_w,
                                          const Eigen::MatrixXd& sigma);

struct QuantumFrontierPoint {
  double mu = 0.0;
  double risk_classical = 0.0;
  double risk_quantum = 0.0;  // physical units via the rescale chain
  double fidelity = 0.0;      // |⟨w_quantum | w_classical⟩|^2 of the directions
  double p_w = 0.0;
  double epsilon_kappa = 0.0;
  double projection_probability = 0.0;
};

struct QuantumFrontier {
  std::vector<QuantumFrontierPoint> points;
  std::vector<std::string> warnings;
};

/// Per grid point: classical solve, hhl_solve, extract_w, swap-test risk.
/// shots = 0 gives exact-mode readout; failures are recorded and skipped.
QuantumFrontier frontier_quantum(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                                 const Eigen::MatrixXd& sigma, const std::vector<double>& mu_grid,
                                 double xi, qp::BudgetMode budget_mode, const hhl::HHLConfig& cfg,
                                 std::uint64_t shots);

}  // namespace qfolio::readout
