#pragma once

#include "qfolio/hamiltonian_sim.hpp"
#include "qfolio/portfolio_qp.hpp"
#include "qfolio/qsim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qfolio::hhl {

enum class Backend { exact, trotter, density_exp };

struct HHLConfig {
  double kappa = 16.0;
  std::optional<double> c_constant;  // default 1/(2 kappa); must be <= 1/kappa
  int n_phase_bits = 10;             // in [3, 12]
  Backend backend = Backend::exact;
  std::optional<double> t0;          // default pi / (2 * Gershgorin bound of M_hat)
  int trotter_steps = 16;            // first-order steps per t0 unit (trotter backend)
  int swap_steps = 8;                // partial-swap steps per t0 unit (density backend)
  std::uint64_t seed = 0;

  double resolved_c() const { return c_constant.value_or(1.0 / (2.0 * kappa)); }
  void validate() const;
};

struct SpectrumEntry {
  double lambda = 0.0;  // eigenvalue of M_hat
  double beta = 0.0;    // overlap of the normalized rhs with the eigenvector
};

struct HHLResult {
  qsim::QuantumState solution_state;  // register "x", ceil_log2(N+2) qubits
  double p_w = 0.0;                   // ancilla post-selection probability
  double rescale = 0.0;               // sqrt(p_w (mu^2+xi^2)/C^2) * tr Sigma
  std::vector<SpectrumEntry> spectrum;
  double epsilon_kappa = 0.0;
  double fidelity_vs_oracle = 0.0;    // |<solution | x_kappa/||x_kappa||>|^2
  double phase_cleanup_probability = 1.0;  // phase register |0⟩ after uncompute
  double solution_purity = 1.0;       // < 1 only for the density backend
  std::optional<std::string> aliasing_warning;

  // config echo
  double t0_used = 0.0;
  int n_phase_bits = 0;
  Backend backend = Backend::exact;
  double kappa = 0.0;
  double c_used = 0.0;
  double mu = 0.0, xi = 0.0, trace_sigma = 0.0;
  int n_assets = 0;
};

/// (mu |0⟩ + xi |1⟩)/sqrt(mu^2 + xi^2) on a ceil_log2(dim)-qubit register "x".
qsim::QuantumState prepare_rhs(double mu, double xi, int dim);

/// Standard phase estimation: blocks[k] must equal U^k for U = e^{+i M_hat t0},
/// so the phase register encodes lambda * t0 / (2 pi) in two's complement.
qsim::QuantumState phase_estimation(const hsim::BlockUnitary& evolution,
                                    const qsim::QuantumState& rhs, int n_phase_bits);

/// Conditioned inversion: branch |m⟩ with decoded |lambda| >= 1/kappa rotates a
/// fresh "flag" ancilla to C/lambda |1⟩; other branches are left untouched.
qsim::QuantumState eigenvalue_inversion(const qsim::QuantumState& pe_state, double kappa,
                                        double c_constant, double t0);

double decode_eigenvalue(std::uint64_t m, int n_phase_bits, double t0);

HHLResult hhl_solve(const qp::KKTSystem& kkt, const HHLConfig& cfg);

/// Eq.-(18) factor sqrt(p_w (mu^2 + xi^2) / C^2) * trace_sigma. Physical-unit
/// recovery divides by trace_sigma^2: w_phys = (rescale / trSigma^2) * amplitudes.
double rescale_factor(double p_w, double mu, double xi, double c_constant, double trace_sigma);

/// Renormalized asset block (slots 2..N+1) of the solution state, plus the
/// projection probability onto that block.
std::pair<qsim::QuantumState, double> extract_w(const HHLResult& result);

}  // namespace qfolio::hhl
