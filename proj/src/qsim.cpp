#include "qfolio/qsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qfolio::qsim {

namespace {

constexpr double kUnitaryTol = 1e-10;
constexpr double kNormTol = 1e-9;
constexpr double kNullBranch = 1e-14;

std::atomic<int> g_qubit_cap{24};

using Complex = std::complex<double>;

std::uint64_t scatter_bits(std::uint64_t v, const std::vector<int>& positions) {
  std::uint64_t out = 0;
  for (std::size_t j = 0; j < positions.size(); ++j) out |= ((v >> j) & 1ULL) << positions[j];
  return out;
}

/// Bit positions (LSB-first within the sub-index) of an ordered register subset,
/// plus the complementary positions in ascending order.
struct SubsetMap {
  std::vector<int> positions;       // sub-index bit j -> absolute bit
  std::vector<int> rest_positions;  // ascending
  int bits = 0;
  int rest_bits = 0;
  std::vector<std::uint64_t> place;  // sub-index -> scattered bits (precomputed)

  std::uint64_t expand_rest(std::uint64_t r) const { return scatter_bits(r, rest_positions); }
};

SubsetMap build_subset_map(const RegisterLayout& layout, std::span<const std::string> subset) {
  SubsetMap m;
  std::vector<bool> used(static_cast<std::size_t>(layout.total_qubits()), false);
  // Last listed register is the least significant field of the sub-index.
  for (auto it = subset.rbegin(); it != subset.rend(); ++it) {
    const Register& r = layout.reg(*it);
    const int sh = layout.shift(*it);
    for (int q = 0; q < r.n_qubits; ++q) {
      m.positions.push_back(sh + q);
      if (used[sh + q]) throw std::invalid_argument("duplicate register in subset: " + *it);
      used[sh + q] = true;
    }
  }
  m.bits = static_cast<int>(m.positions.size());
  for (int p = 0; p < layout.total_qubits(); ++p)
    if (!used[p]) m.rest_positions.push_back(p);
  m.rest_bits = static_cast<int>(m.rest_positions.size());
  m.place.resize(std::uint64_t{1} << m.bits);
  for (std::uint64_t v = 0; v < m.place.size(); ++v) m.place[v] = scatter_bits(v, m.positions);
  return m;
}

void check_unitary(const Eigen::MatrixXcd& u) {
  if (u.rows() != u.cols()) throw std::invalid_argument("unitary must be square");
  const Eigen::MatrixXcd g = u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols());
  if (g.cwiseAbs().maxCoeff() > kUnitaryTol)
    throw std::invalid_argument("matrix is not unitary to 1e-10");
}

/// Applies u to the target sub-index of every rest slice of `amps`.
void apply_subset_inplace(Eigen::VectorXcd& amps, const Eigen::MatrixXcd& u, const SubsetMap& m) {
  const std::uint64_t tdim = std::uint64_t{1} << m.bits;
  Eigen::VectorXcd x(tdim), y(tdim);
  const std::uint64_t rest_count = std::uint64_t{1} << m.rest_bits;
  for (std::uint64_t r = 0; r < rest_count; ++r) {
    const std::uint64_t base = m.expand_rest(r);
    for (std::uint64_t v = 0; v < tdim; ++v) x(v) = amps(base | m.place[v]);
    y.noalias() = u * x;
    for (std::uint64_t v = 0; v < tdim; ++v) amps(base | m.place[v]) = y(v);
  }
}

void apply_keyed_inplace(Eigen::VectorXcd& amps, const RegisterLayout& layout,
                         std::span<const std::string> key_regs,
                         std::span<const std::string> target_regs,
                         const std::function<Eigen::MatrixXcd(std::uint64_t)>& block) {
  std::vector<std::string> all(key_regs.begin(), key_regs.end());
  all.insert(all.end(), target_regs.begin(), target_regs.end());
  const SubsetMap keys = build_subset_map(layout, std::span<const std::string>(all.data(), key_regs.size()));
  // Rebuild a map whose "rest" excludes both keys and targets.
  const SubsetMap combined = build_subset_map(layout, std::span<const std::string>(all));
  SubsetMap tgt = build_subset_map(layout, target_regs);

  const std::uint64_t tdim = std::uint64_t{1} << tgt.bits;
  const std::uint64_t n_keys = std::uint64_t{1} << keys.bits;
  Eigen::VectorXcd x(tdim), y(tdim);
  const std::uint64_t rest_count = std::uint64_t{1} << combined.rest_bits;
  for (std::uint64_t k = 0; k < n_keys; ++k) {
    const Eigen::MatrixXcd u = block(k);
    if (static_cast<std::uint64_t>(u.rows()) != tdim)
      throw std::invalid_argument("keyed block dimension mismatch");
    check_unitary(u);
    const std::uint64_t key_bits = keys.place[k];
    for (std::uint64_t r = 0; r < rest_count; ++r) {
      const std::uint64_t base = key_bits | combined.expand_rest(r);
      for (std::uint64_t v = 0; v < tdim; ++v) x(v) = amps(base | tgt.place[v]);
      y.noalias() = u * x;
      for (std::uint64_t v = 0; v < tdim; ++v) amps(base | tgt.place[v]) = y(v);
    }
  }
}

void h_abs(Eigen::VectorXcd& a, int pos) {
  const std::uint64_t bit = std::uint64_t{1} << pos;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(a.size()); ++i) {
    if (i & bit) continue;
    const Complex lo = a(i), hi = a(i | bit);
    a(i) = (lo + hi) * inv_sqrt2;
    a(i | bit) = (lo - hi) * inv_sqrt2;
  }
}

void cphase_abs(Eigen::VectorXcd& a, int p1, int p2, double angle) {
  const std::uint64_t m = (std::uint64_t{1} << p1) | (std::uint64_t{1} << p2);
  const Complex ph = std::polar(1.0, angle);
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(a.size()); ++i)
    if ((i & m) == m) a(i) *= ph;
}

void swap_abs(Eigen::VectorXcd& a, int p1, int p2) {
  const std::uint64_t b1 = std::uint64_t{1} << p1;
  const std::uint64_t b2 = std::uint64_t{1} << p2;
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(a.size()); ++i) {
    const bool v1 = i & b1, v2 = i & b2;
    if (v1 && !v2) {
      const std::uint64_t j = (i & ~b1) | b2;
      std::swap(a(i), a(j));
    }
  }
}

}  // namespace

int ceil_log2(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("ceil_log2(0)");
  int k = 0;
  while ((std::uint64_t{1} << k) < n) ++k;
  return k;
}

std::uint64_t next_pow2(std::uint64_t n) { return std::uint64_t{1} << ceil_log2(n); }

int default_qubit_cap() { return g_qubit_cap.load(); }
void set_default_qubit_cap(int cap) {
  if (cap < 1 || cap > 30) throw std::invalid_argument("qubit cap must be in [1, 30]");
  g_qubit_cap.store(cap);
}

RegisterLayout::RegisterLayout(std::initializer_list<Register> regs)
    : RegisterLayout(std::vector<Register>(regs), default_qubit_cap()) {}
RegisterLayout::RegisterLayout(std::vector<Register> regs)
    : RegisterLayout(std::move(regs), default_qubit_cap()) {}
RegisterLayout::RegisterLayout(std::vector<Register> regs, int qubit_cap)
    : regs_(std::move(regs)), qubit_cap_(qubit_cap) {
  finalize();
}

void RegisterLayout::finalize() {
  total_qubits_ = 0;
  for (const auto& r : regs_) {
    if (r.name.empty()) throw std::invalid_argument("register name must be non-empty");
    if (r.n_qubits < 0) throw std::invalid_argument("register width must be >= 0");
    total_qubits_ += r.n_qubits;
  }
  for (std::size_t i = 0; i < regs_.size(); ++i)
    for (std::size_t j = i + 1; j < regs_.size(); ++j)
      if (regs_[i].name == regs_[j].name)
        throw std::invalid_argument("duplicate register name: " + regs_[i].name);
  if (total_qubits_ > qubit_cap_)
    throw std::invalid_argument("qubit cap exceeded: need " + std::to_string(total_qubits_) +
                                ", cap " + std::to_string(qubit_cap_));
  // First register owns the most significant bits.
  shifts_.resize(regs_.size());
  int acc = total_qubits_;
  for (std::size_t i = 0; i < regs_.size(); ++i) {
    acc -= regs_[i].n_qubits;
    shifts_[i] = acc;
  }
}

bool RegisterLayout::has(std::string_view name) const {
  return std::any_of(regs_.begin(), regs_.end(), [&](const auto& r) { return r.name == name; });
}

const Register& RegisterLayout::reg(std::string_view name) const {
  for (const auto& r : regs_)
    if (r.name == name) return r;
  throw std::invalid_argument("unknown register: " + std::string(name));
}

int RegisterLayout::shift(std::string_view name) const {
  for (std::size_t i = 0; i < regs_.size(); ++i)
    if (regs_[i].name == name) return shifts_[i];
  throw std::invalid_argument("unknown register: " + std::string(name));
}

std::uint64_t RegisterLayout::mask(std::string_view name) const {
  return (std::uint64_t{1} << reg(name).n_qubits) - 1;
}

std::uint64_t RegisterLayout::extract(std::uint64_t index, std::string_view name) const {
  return (index >> shift(name)) & mask(name);
}

std::uint64_t RegisterLayout::insert(std::uint64_t index, std::string_view name,
                                     std::uint64_t value) const {
  const int sh = shift(name);
  const std::uint64_t m = mask(name);
  if (value > m) throw std::invalid_argument("register value out of range");
  return (index & ~(m << sh)) | (value << sh);
}

RegisterLayout RegisterLayout::without(std::span<const std::string> names) const {
  std::vector<Register> keep;
  for (const auto& r : regs_) {
    if (std::find(names.begin(), names.end(), r.name) == names.end()) keep.push_back(r);
  }
  for (const auto& n : names) reg(n);  // validates existence
  return RegisterLayout(std::move(keep), qubit_cap_);
}

RegisterLayout RegisterLayout::with_appended(Register r) const {
  std::vector<Register> regs = regs_;
  regs.push_back(std::move(r));
  return RegisterLayout(std::move(regs), qubit_cap_);
}

RegisterLayout RegisterLayout::with_prepended(Register r) const {
  std::vector<Register> regs;
  regs.push_back(std::move(r));
  regs.insert(regs.end(), regs_.begin(), regs_.end());
  return RegisterLayout(std::move(regs), qubit_cap_);
}

bool RegisterLayout::operator==(const RegisterLayout& other) const {
  if (regs_.size() != other.regs_.size()) return false;
  for (std::size_t i = 0; i < regs_.size(); ++i)
    if (regs_[i].name != other.regs_[i].name || regs_[i].n_qubits != other.regs_[i].n_qubits)
      return false;
  return true;
}

QuantumState::QuantumState(RegisterLayout layout, Eigen::VectorXcd amplitudes)
    : layout_(std::move(layout)), amps_(std::move(amplitudes)) {
  if (static_cast<std::uint64_t>(amps_.size()) != layout_.dim())
    throw std::invalid_argument("amplitude vector length does not match layout dimension");
  if (std::abs(amps_.norm() - 1.0) > kNormTol)
    throw std::invalid_argument("state norm must be 1 within 1e-10");
}

DensityMatrix::DensityMatrix(RegisterLayout layout, Eigen::MatrixXcd matrix)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
  if (static_cast<std::uint64_t>(matrix_.rows()) != layout_.dim() || matrix_.rows() != matrix_.cols())
    throw std::invalid_argument("density matrix dimension does not match layout");
  validate();
}

DensityMatrix::DensityMatrix(RegisterLayout layout, Eigen::MatrixXcd matrix, Unchecked)
    : layout_(std::move(layout)), matrix_(std::move(matrix)) {
  if (static_cast<std::uint64_t>(matrix_.rows()) != layout_.dim() || matrix_.rows() != matrix_.cols())
    throw std::invalid_argument("density matrix dimension does not match layout");
}

void DensityMatrix::validate() const {
  if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("density matrix not Hermitian to 1e-10");
  if (std::abs(matrix_.trace().real() - 1.0) > 1e-10 || std::abs(matrix_.trace().imag()) > 1e-10)
    throw std::invalid_argument("density matrix trace must be 1 within 1e-10");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("density matrix has eigenvalue below -1e-10");
}

DensityMatrix DensityMatrix::from_state(const QuantumState& s) {
  return DensityMatrix(s.layout(), s.amplitudes() * s.amplitudes().adjoint(), Unchecked{});
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

QuantumState allocate_state(const RegisterLayout& layout) {
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(layout.dim());
  amps(0) = 1.0;
  return QuantumState(layout, std::move(amps));
}

QuantumState apply_unitary(const QuantumState& s, const Eigen::MatrixXcd& u,
                           std::span<const std::string> targets) {
  const SubsetMap m = build_subset_map(s.layout(), targets);
  if (static_cast<std::uint64_t>(u.rows()) != (std::uint64_t{1} << m.bits))
    throw std::invalid_argument("unitary dimension does not match target registers");
  check_unitary(u);
  Eigen::VectorXcd amps = s.amplitudes();
  apply_subset_inplace(amps, u, m);
  return QuantumState(s.layout(), std::move(amps));
}

QuantumState apply_unitary(const QuantumState& s, const Eigen::MatrixXcd& u,
                           std::initializer_list<std::string> targets) {
  const std::vector<std::string> t(targets);
  return apply_unitary(s, u, std::span<const std::string>(t));
}

QuantumState hadamard_all(const QuantumState& s, std::string_view reg) {
  const Register& r = s.layout().reg(reg);
  const int sh = s.layout().shift(reg);
  Eigen::VectorXcd amps = s.amplitudes();
  for (int q = 0; q < r.n_qubits; ++q) h_abs(amps, sh + q);
  return QuantumState(s.layout(), std::move(amps));
}

QuantumState keyed_unitary(const QuantumState& s, std::span<const std::string> key_regs,
                           std::span<const std::string> target_regs,
                           const std::function<Eigen::MatrixXcd(std::uint64_t)>& block) {
  Eigen::VectorXcd amps = s.amplitudes();
  apply_keyed_inplace(amps, s.layout(), key_regs, target_regs, block);
  return QuantumState(s.layout(), std::move(amps));
}

QuantumState keyed_unitary(const QuantumState& s, std::initializer_list<std::string> key_regs,
                           std::initializer_list<std::string> target_regs,
                           const std::function<Eigen::MatrixXcd(std::uint64_t)>& block) {
  const std::vector<std::string> k(key_regs), t(target_regs);
  return keyed_unitary(s, std::span<const std::string>(k), std::span<const std::string>(t), block);
}

QuantumState controlled_amplitude_rotation(const QuantumState& s,
                                           std::span<const std::string> value_regs,
                                           const std::function<double(std::uint64_t)>& value_map,
                                           std::string_view ancilla, double delta) {
  const Register& anc = s.layout().reg(ancilla);
  if (anc.n_qubits != 1) throw std::invalid_argument("ancilla must be a single qubit");
  const int anc_pos = s.layout().shift(ancilla);
  const std::uint64_t anc_bit = std::uint64_t{1} << anc_pos;
  for (std::uint64_t i = 0; i < s.layout().dim(); ++i)
    if ((i & anc_bit) && std::abs(s.amplitudes()(i)) > 1e-12)
      throw std::invalid_argument("ancilla register occupied");

  int key_bits = 0;
  for (const auto& n : value_regs) key_bits += s.layout().reg(n).n_qubits;
  for (std::uint64_t k = 0; k < (std::uint64_t{1} << key_bits); ++k)
    if (std::abs(delta * value_map(k)) > 1.0 + 1e-12)
      throw std::invalid_argument("rotation amplitude overflow");

  const std::vector<std::string> tgt{std::string(ancilla)};
  return keyed_unitary(s, value_regs, std::span<const std::string>(tgt),
                       [&](std::uint64_t k) -> Eigen::MatrixXcd {
                         const double a = delta * value_map(k);
                         const double c = std::sqrt(std::max(0.0, 1.0 - a * a));
                         Eigen::MatrixXcd u(2, 2);
                         u << c, -a, a, c;
                         return u;
                       });
}

QuantumState controlled_amplitude_rotation(const QuantumState& s, std::string_view value_reg,
                                           const std::function<double(std::uint64_t)>& value_map,
                                           std::string_view ancilla, double delta) {
  const std::vector<std::string> v{std::string(value_reg)};
  return controlled_amplitude_rotation(s, std::span<const std::string>(v), value_map, ancilla,
                                       delta);
}

std::pair<QuantumState, double> postselect(const QuantumState& s, std::string_view reg,
                                           std::uint64_t outcome) {
  const std::vector<std::string> subset{std::string(reg)};
  const SubsetMap m = build_subset_map(s.layout(), std::span<const std::string>(subset));
  if (outcome >= m.place.size()) throw std::invalid_argument("outcome outside register range");

  const std::uint64_t rest_count = std::uint64_t{1} << m.rest_bits;
  Eigen::VectorXcd out(rest_count);
  const std::uint64_t sel = m.place[outcome];
  for (std::uint64_t r = 0; r < rest_count; ++r) out(r) = s.amplitudes()(m.expand_rest(r) | sel);
  const double p = out.squaredNorm();
  if (p < kNullBranch) throw std::runtime_error("post-selection on null branch");
  out /= std::sqrt(p);
  return {QuantumState(s.layout().without(subset), std::move(out)), p};
}

std::pair<QuantumState, double> postselect_projector(const QuantumState& s, std::string_view reg,
                                                     const Eigen::VectorXcd& target) {
  const std::vector<std::string> subset{std::string(reg)};
  const SubsetMap m = build_subset_map(s.layout(), std::span<const std::string>(subset));
  if (static_cast<std::uint64_t>(target.size()) != m.place.size())
    throw std::invalid_argument("target state dimension does not match register");
  if (std::abs(target.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("target state must be normalized");

  const std::uint64_t rest_count = std::uint64_t{1} << m.rest_bits;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(rest_count);
  for (std::uint64_t r = 0; r < rest_count; ++r) {
    const std::uint64_t base = m.expand_rest(r);
    Complex acc = 0.0;
    for (std::uint64_t v = 0; v < m.place.size(); ++v)
      acc += std::conj(target(v)) * s.amplitudes()(base | m.place[v]);
    out(r) = acc;
  }
  const double p = out.squaredNorm();
  if (p < kNullBranch) throw std::runtime_error("post-selection on null branch");
  out /= std::sqrt(p);
  return {QuantumState(s.layout().without(subset), std::move(out)), p};
}

DensityMatrix partial_trace(const QuantumState& s, std::span<const std::string> traced) {
  if (traced.size() == s.layout().registers().size())
    throw std::invalid_argument("cannot trace out every register");
  const SubsetMap m = build_subset_map(s.layout(), traced);
  const std::uint64_t keep = std::uint64_t{1} << m.rest_bits;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(keep, keep);
  for (std::uint64_t r1 = 0; r1 < keep; ++r1) {
    const std::uint64_t b1 = m.expand_rest(r1);
    for (std::uint64_t r2 = 0; r2 <= r1; ++r2) {
      const std::uint64_t b2 = m.expand_rest(r2);
      Complex acc = 0.0;
      for (const std::uint64_t pk : m.place)
        acc += s.amplitudes()(b1 | pk) * std::conj(s.amplitudes()(b2 | pk));
      rho(r1, r2) = acc;
      rho(r2, r1) = std::conj(acc);
    }
  }
  std::vector<std::string> traced_names(traced.begin(), traced.end());
  return DensityMatrix(s.layout().without(traced_names), std::move(rho), DensityMatrix::Unchecked{});
}

DensityMatrix partial_trace(const QuantumState& s, std::initializer_list<std::string> traced) {
  const std::vector<std::string> t(traced);
  return partial_trace(s, std::span<const std::string>(t));
}

Eigen::VectorXd register_probabilities(const QuantumState& s, std::string_view reg) {
  const std::vector<std::string> subset{std::string(reg)};
  const SubsetMap m = build_subset_map(s.layout(), std::span<const std::string>(subset));
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(m.place.size());
  const std::uint64_t rest_count = std::uint64_t{1} << m.rest_bits;
  for (std::uint64_t v = 0; v < m.place.size(); ++v) {
    double acc = 0.0;
    for (std::uint64_t r = 0; r < rest_count; ++r)
      acc += std::norm(s.amplitudes()(m.expand_rest(r) | m.place[v]));
    probs(v) = acc;
  }
  return probs;
}

std::map<std::uint64_t, std::uint64_t> measure_samples(const QuantumState& s, std::string_view reg,
                                                       std::uint64_t shots, std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  const Eigen::VectorXd probs = register_probabilities(s, reg);
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::map<std::uint64_t, std::uint64_t> hist;
  for (std::uint64_t t = 0; t < shots; ++t) {
    const double u = unif(rng) * acc;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const std::uint64_t idx = static_cast<std::uint64_t>(std::distance(cdf.begin(), it));
    ++hist[std::min<std::uint64_t>(idx, cdf.size() - 1)];
  }
  return hist;
}

QuantumState add_register(const QuantumState& s, Register r) {
  const RegisterLayout nl = s.layout().with_appended(r);
  const std::uint64_t block = std::uint64_t{1} << r.n_qubits;
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(nl.dim());
  for (std::uint64_t i = 0; i < s.layout().dim(); ++i) amps(i * block) = s.amplitudes()(i);
  return QuantumState(nl, std::move(amps));
}

QuantumState prepend_register(const QuantumState& s, Register r) {
  const RegisterLayout nl = s.layout().with_prepended(r);
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(nl.dim());
  amps.head(s.amplitudes().size()) = s.amplitudes();
  return QuantumState(nl, std::move(amps));
}

QuantumState qft(const QuantumState& s, std::string_view reg, bool inverse) {
  const Register& r = s.layout().reg(reg);
  const int k = r.n_qubits;
  const int sh = s.layout().shift(reg);
  // msb-first indexing within the register
  const auto pos = [&](int i) { return sh + (k - 1 - i); };
  Eigen::VectorXcd amps = s.amplitudes();
  const double pi = std::numbers::pi;

  if (!inverse) {
    for (int i = 0; i < k; ++i) {
      h_abs(amps, pos(i));
      for (int j = i + 1; j < k; ++j)
        cphase_abs(amps, pos(i), pos(j), 2.0 * pi / std::pow(2.0, j - i + 1));
    }
    for (int i = 0; i < k / 2; ++i) swap_abs(amps, pos(i), pos(k - 1 - i));
  } else {
    for (int i = 0; i < k / 2; ++i) swap_abs(amps, pos(i), pos(k - 1 - i));
    for (int i = k - 1; i >= 0; --i) {
      for (int j = k - 1; j > i; --j)
        cphase_abs(amps, pos(i), pos(j), -2.0 * pi / std::pow(2.0, j - i + 1));
      h_abs(amps, pos(i));
    }
  }
  return QuantumState(s.layout(), std::move(amps));
}

QuantumState relabel(const QuantumState& s, RegisterLayout new_layout) {
  if (new_layout.dim() != s.layout().dim())
    throw std::invalid_argument("relabel requires equal dimensions");
  return QuantumState(std::move(new_layout), s.amplitudes());
}

// ---- density-matrix operations ---------------------------------------------

namespace {

/// rho' = U rho U^dagger with U acting on a register subset: two column passes.
void conjugate_columns(Eigen::MatrixXcd& rho,
                       const std::function<void(Eigen::VectorXcd&)>& apply_op) {
  Eigen::VectorXcd col(rho.rows());
  for (Eigen::Index c = 0; c < rho.cols(); ++c) {
    col = rho.col(c);
    apply_op(col);
    rho.col(c) = col;
  }
  Eigen::MatrixXcd adj = rho.adjoint();
  for (Eigen::Index c = 0; c < adj.cols(); ++c) {
    col = adj.col(c);
    apply_op(col);
    adj.col(c) = col;
  }
  rho = adj.adjoint();
}

}  // namespace

DensityMatrix apply_unitary(const DensityMatrix& d, const Eigen::MatrixXcd& u,
                            std::span<const std::string> targets) {
  const SubsetMap m = build_subset_map(d.layout(), targets);
  if (static_cast<std::uint64_t>(u.rows()) != (std::uint64_t{1} << m.bits))
    throw std::invalid_argument("unitary dimension does not match target registers");
  check_unitary(u);
  Eigen::MatrixXcd rho = d.matrix();
  conjugate_columns(rho, [&](Eigen::VectorXcd& v) { apply_subset_inplace(v, u, m); });
  return DensityMatrix(d.layout(), std::move(rho), DensityMatrix::Unchecked{});
}

DensityMatrix keyed_unitary(const DensityMatrix& d, std::span<const std::string> key_regs,
                            std::span<const std::string> target_regs,
                            const std::function<Eigen::MatrixXcd(std::uint64_t)>& block) {
  Eigen::MatrixXcd rho = d.matrix();
  conjugate_columns(rho, [&](Eigen::VectorXcd& v) {
    apply_keyed_inplace(v, d.layout(), key_regs, target_regs, block);
  });
  return DensityMatrix(d.layout(), std::move(rho), DensityMatrix::Unchecked{});
}

std::pair<DensityMatrix, double> postselect(const DensityMatrix& d, std::string_view reg,
                                            std::uint64_t outcome) {
  const std::vector<std::string> subset{std::string(reg)};
  const SubsetMap m = build_subset_map(d.layout(), std::span<const std::string>(subset));
  if (outcome >= m.place.size()) throw std::invalid_argument("outcome outside register range");
  const std::uint64_t keep = std::uint64_t{1} << m.rest_bits;
  const std::uint64_t sel = m.place[outcome];
  Eigen::MatrixXcd out(keep, keep);
  for (std::uint64_t r1 = 0; r1 < keep; ++r1)
    for (std::uint64_t r2 = 0; r2 < keep; ++r2)
      out(r1, r2) = d.matrix()(m.expand_rest(r1) | sel, m.expand_rest(r2) | sel);
  const double p = out.trace().real();
  if (p < kNullBranch) throw std::runtime_error("post-selection on null branch");
  out /= p;
  return {DensityMatrix(d.layout().without(subset), std::move(out), DensityMatrix::Unchecked{}), p};
}

DensityMatrix partial_trace(const DensityMatrix& d, std::span<const std::string> traced) {
  if (traced.size() == d.layout().registers().size())
    throw std::invalid_argument("cannot trace out every register");
  const SubsetMap m = build_subset_map(d.layout(), traced);
  const std::uint64_t keep = std::uint64_t{1} << m.rest_bits;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(keep, keep);
  for (std::uint64_t r1 = 0; r1 < keep; ++r1) {
    const std::uint64_t b1 = m.expand_rest(r1);
    for (std::uint64_t r2 = 0; r2 < keep; ++r2) {
      const std::uint64_t b2 = m.expand_rest(r2);
      Complex acc = 0.0;
      for (const std::uint64_t pk : m.place) acc += d.matrix()(b1 | pk, b2 | pk);
      rho(r1, r2) = acc;
    }
  }
  std::vector<std::string> traced_names(traced.begin(), traced.end());
  return DensityMatrix(d.layout().without(traced_names), std::move(rho), DensityMatrix::Unchecked{});
}

DensityMatrix attach_register(const DensityMatrix& d, Register r, const Eigen::MatrixXcd& rho) {
  if (static_cast<std::uint64_t>(rho.rows()) != (std::uint64_t{1} << r.n_qubits) ||
      rho.rows() != rho.cols())
    throw std::invalid_argument("attached state dimension does not match register");
  if (std::abs(rho.trace().real() - 1.0) > 1e-9)
    throw std::invalid_argument("attached state must have unit trace");
  const RegisterLayout nl = d.layout().with_appended(std::move(r));
  Eigen::MatrixXcd out(nl.dim(), nl.dim());
  const std::uint64_t b = rho.rows();
  for (std::uint64_t i = 0; i < d.layout().dim(); ++i)
    for (std::uint64_t j = 0; j < d.layout().dim(); ++j)
      out.block(i * b, j * b, b, b) = d.matrix()(i, j) * rho;
  return DensityMatrix(nl, std::move(out), DensityMatrix::Unchecked{});
}

}  // namespace qfolio::qsim
