#pragma once

#include "qfolio/market_data.hpp"
#include "qfolio/qsim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qfolio::prep {

/// Simulated qRAM table: |i⟩|x⟩ -> |i⟩|x XOR code(d_i)⟩ with d_i stored in an
/// m-bit two's-complement fixed-point code, or held exactly (no data-register
/// circuit possible in that mode, but preparations can still key rotations on
/// the stored values).
class QramOracle {
 public:
  static QramOracle exact(std::vector<double> values);
  static QramOracle fixed_point(std::vector<double> values, int frac_bits);

  std::size_t size() const { return values_.size(); }
  bool is_exact() const { return m_bits_ == 0; }
  int m_bits() const { return m_bits_; }
  int frac_bits() const { return frac_bits_; }

  /// Stored (possibly quantized) value for index i; 0 beyond the table.
  double value(std::size_t i) const;
  /// Fixed-point bit pattern for index i (fixed_point mode only).
  std::uint64_t pattern(std::size_t i) const;
  double decode(std::uint64_t pattern) const;

 private:
  std::vector<double> values_;  // quantized in fixed_point mode
  int m_bits_ = 0;              // total data-register width, 0 = exact
  int frac_bits_ = 0;
};

/// Eq.-(6)-style query: requires the data register to be |0...0⟩ in every branch.
qsim::QuantumState oracle_query(const QramOracle& o, const qsim::QuantumState& s,
                                std::span<const std::string> index_regs,
                                std::string_view data_reg);
qsim::QuantumState oracle_query(const QramOracle& o, const qsim::QuantumState& s,
                                std::initializer_list<std::string> index_regs,
                                std::string_view data_reg);
/// Same permutation without the cleared-data precondition (uncompute).
qsim::QuantumState oracle_query_inverse(const QramOracle& o, const qsim::QuantumState& s,
                                        std::span<const std::string> index_regs,
                                        std::string_view data_reg);

struct PrepOutcome {
  qsim::QuantumState state;
  double success_probability = 0.0;
  double delta_used = 0.0;
};

struct PrepOptions {
  std::optional<double> delta;   // default 1/max|y_s(t)|
  std::optional<int> frac_bits;  // m-bit oracle quantization; default exact
  // Runs the literal circuit with an explicit m-bit data register (needs
  // frac_bits and enough headroom under the qubit cap). Otherwise the
  // query/rotate/uncompute round trip is collapsed into one keyed rotation,
  // which is algebraically identical because the query is self-inverse.
  bool explicit_data_register = false;
};

/// |χ⟩ = (1/|y|) Σ_{t,s} y_s(t) |t⟩|s⟩ over registers {t, s}. Non-power-of-two
/// T and N are zero-padded; the success probability P_χ = δ² Σy² / (T_pad N_pad)
/// uses the padded register sizes.
PrepOutcome prepare_chi(const market::ReturnsPanel& panel, const PrepOptions& opts = {});

/// Hadamards on the time register of |χ⟩ + post-selection of |0...0⟩:
/// |R⟩ ∝ Σ_s (Σ_t y_s(t)) |s⟩ with P_R = |y'|² / (T_pad |y|²).
PrepOutcome prepare_R_state(const PrepOutcome& chi, std::string_view t_register = "t");

/// Mean-adjusted returns in amplitude encoding over {t, s}:
/// |χ̃⟩ = (1/|ỹ|) Σ_{t,s} (y_s(t) - mean_t' y_s(t')) |t⟩|s⟩,
/// P_χ̃ = δ²|ỹ|² / (4 T_pad N_pad). Runs the ancilla sequence (a, b, [c], d, e)
/// with projector post-selection.
PrepOutcome prepare_chi_tilde(const market::ReturnsPanel& panel, const PrepOptions& opts = {});

/// Partial trace of |χ̃⟩⟨χ̃| over the time register: Σ/trΣ on the asset register.
qsim::DensityMatrix covariance_density(const PrepOutcome& chi_tilde);

/// Inverts P_χ̃ = δ²(T-1)trΣ/(4TN): returns 4·T·N·p/(δ²(T-1)).
/// T and N follow the padded-register convention of prepare_chi_tilde.
double estimate_trace_sigma(double p_chi_tilde, double delta, int n_times, int n_assets);

/// Binary subnorm tree: level k holds sums of squares of the vector entries
/// below each node; leaves hold the squares, signs kept separately.
struct KPTree {
  int depth = 0;                             // ceil(log2 n_leaves)
  std::vector<std::vector<double>> levels;   // levels[0] = {root}; levels[depth] = leaf squares
  std::vector<double> leaf_signs;            // ±1 per (padded) leaf, +1 for zero entries
  std::size_t n_values = 0;                  // original vector length

  double root() const { return levels.front().front(); }
  std::size_t n_leaves() const { return levels.back().size(); }
};

KPTree kp_build(const Eigen::VectorXd& v);
void kp_update(KPTree& tree, std::size_t index, double new_value);

/// Deterministic preparation via the subnorm-ratio rotation cascade; the
/// resulting state over register "v" equals sign_i |v_i| / ||v||.
qsim::QuantumState kp_prepare(const KPTree& tree);

/// The same cascade as Givens rotations on tree-node representatives, packed
/// into an n_values x n_values orthogonal matrix with first column v/||v||.
Eigen::MatrixXd kp_rotation_cascade(const KPTree& tree);

}  // namespace qfolio::prep
