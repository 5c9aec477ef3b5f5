#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qfolio::qsim {

// Dense, exact state-vector / density-matrix simulation over named registers.
//
// Bit convention: the FIRST register in a layout occupies the most significant
// bits of the basis index, so |a⟩|b⟩ for layout {a, b} reads left to right.
// Registers may have zero qubits (dimension-1 placeholders).

/// Qubits needed to index n >= 1 levels (0 for n == 1).
int ceil_log2(std::uint64_t n);
std::uint64_t next_pow2(std::uint64_t n);

/// Process-wide default qubit cap (QFOLIO_QUBIT_CAP at the CLI).
int default_qubit_cap();
void set_default_qubit_cap(int cap);

struct Register {
  std::string name;
  int n_qubits = 0;
};

class RegisterLayout {
 public:
  RegisterLayout() = default;
  RegisterLayout(std::initializer_list<Register> regs);
  explicit RegisterLayout(std::vector<Register> regs);
  RegisterLayout(std::vector<Register> regs, int qubit_cap);

  int total_qubits() const { return total_qubits_; }
  std::uint64_t dim() const { return std::uint64_t{1} << total_qubits_; }
  int qubit_cap() const { return qubit_cap_; }
  const std::vector<Register>& registers() const { return regs_; }

  bool has(std::string_view name) const;
  const Register& reg(std::string_view name) const;
  /// Offset of the register's least significant bit in the basis index.
  int shift(std::string_view name) const;
  std::uint64_t mask(std::string_view name) const;  // (1 << n_qubits) - 1, unshifted
  std::uint64_t extract(std::uint64_t index, std::string_view name) const;
  std::uint64_t insert(std::uint64_t index, std::string_view name, std::uint64_t value) const;

  RegisterLayout without(std::span<const std::string> names) const;
  RegisterLayout with_appended(Register r) const;   // least significant position
  RegisterLayout with_prepended(Register r) const;  // most significant position

  bool operator==(const RegisterLayout& other) const;

 private:
  void finalize();
  std::vector<Register> regs_;
  std::vector<int> shifts_;
  int total_qubits_ = 0;
  int qubit_cap_ = 0;
};

class QuantumState {
 public:
  QuantumState(RegisterLayout layout, Eigen::VectorXcd amplitudes);

  const RegisterLayout& layout() const { return layout_; }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  Eigen::VectorXcd& mutable_amplitudes() { return amps_; }
  double norm() const { return amps_.norm(); }

 private:
  RegisterLayout layout_;
  Eigen::VectorXcd amps_;
};

class DensityMatrix {
 public:
  struct Unchecked {};
  DensityMatrix(RegisterLayout layout, Eigen::MatrixXcd matrix);
  DensityMatrix(RegisterLayout layout, Eigen::MatrixXcd matrix, Unchecked);
  static DensityMatrix from_state(const QuantumState& s);

  const RegisterLayout& layout() const { return layout_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  Eigen::MatrixXcd& mutable_matrix() { return matrix_; }
  double purity() const;

  /// Full invariant check (Hermitian to 1e-10, unit trace, eigenvalues >= -1e-10).
  void validate() const;

 private:
  RegisterLayout layout_;
  Eigen::MatrixXcd matrix_;
};

// ---- state operations -------------------------------------------------------

QuantumState allocate_state(const RegisterLayout& layout);

QuantumState apply_unitary(const QuantumState& s, const Eigen::MatrixXcd& u,
                           std::span<const std::string> targets);
QuantumState apply_unitary(const QuantumState& s, const Eigen::MatrixXcd& u,
                           std::initializer_list<std::string> targets);

QuantumState hadamard_all(const QuantumState& s, std::string_view reg);

/// Block-diagonal unitary in the key registers' basis: for every key value k
/// the matrix block(k) acts on the target registers. Each block is checked
/// for unitarity. This is the engine behind controlled rotations, controlled
/// evolutions and conditioned gates.
QuantumState keyed_unitary(const QuantumState& s, std::span<const std::string> key_regs,
                           std::span<const std::string> target_regs,
                           const std::function<Eigen::MatrixXcd(std::uint64_t)>& block);
QuantumState keyed_unitary(const QuantumState& s, std::initializer_list<std::string> key_regs,
                           std::initializer_list<std::string> target_regs,
                           const std::function<Eigen::MatrixXcd(std::uint64_t)>& block);

/// |v⟩|0⟩ -> |v⟩(sqrt(1 - d^2 v^2)|0⟩ + d v|1⟩) with v = value_map(key).
/// Requires the ancilla to be |0⟩ in every branch and |delta * v| <= 1.
QuantumState controlled_amplitude_rotation(const QuantumState& s,
                                           std::span<const std::string> value_regs,
                                           const std::function<double(std::uint64_t)>& value_map,
                                           std::string_view ancilla, double delta);
QuantumState controlled_amplitude_rotation(const QuantumState& s, std::string_view value_reg,
                                           const std::function<double(std::uint64_t)>& value_map,
                                           std::string_view ancilla, double delta);

/// Projects a register onto a basis outcome; the register is removed from the
/// layout and the remaining state renormalized. Returns the branch probability.
std::pair<QuantumState, double> postselect(const QuantumState& s, std::string_view reg,
                                           std::uint64_t outcome);

/// Projects a register onto an arbitrary normalized target state.
std::pair<QuantumState, double> postselect_projector(const QuantumState& s, std::string_view reg,
                                                     const Eigen::VectorXcd& target);

DensityMatrix partial_trace(const QuantumState& s, std::span<const std::string> traced);
DensityMatrix partial_trace(const QuantumState& s, std::initializer_list<std::string> traced);

std::map<std::uint64_t, std::uint64_t> measure_samples(const QuantumState& s, std::string_view reg,
                                                       std::uint64_t shots, std::uint64_t seed);

/// Born probabilities of one register (marginal over the rest).
Eigen::VectorXd register_probabilities(const QuantumState& s, std::string_view reg);

QuantumState add_register(const QuantumState& s, Register r);      // appended, |0...0⟩
QuantumState prepend_register(const QuantumState& s, Register r);  // most significant, |0...0⟩

/// Quantum Fourier transform on one register: QFT|j⟩ = 2^{-k/2} sum_k e^{+2πijk/D}|k⟩.
QuantumState qft(const QuantumState& s, std::string_view reg, bool inverse);

/// Reinterprets the amplitudes under a different layout of equal dimension.
QuantumState relabel(const QuantumState& s, RegisterLayout new_layout);

// ---- density-matrix operations ---------------------------------------------

DensityMatrix apply_unitary(const DensityMatrix& d, const Eigen::MatrixXcd& u,
                            std::span<const std::string> targets);
DensityMatrix keyed_unitary(const DensityMatrix& d, std::span<const std::string> key_regs,
                            std::span<const std::string> target_regs,
                            const std::function<Eigen::MatrixXcd(std::uint64_t)>& block);
std::pair<DensityMatrix, double> postselect(const DensityMatrix& d, std::string_view reg,
                                            std::uint64_t outcome);
DensityMatrix partial_trace(const DensityMatrix& d, std::span<const std::string> traced);
/// Appends a register (least significant) prepared in the given density matrix.
DensityMatrix attach_register(const DensityMatrix& d, Register r, const Eigen::MatrixXcd& rho);

}  // namespace qfolio::qsim
