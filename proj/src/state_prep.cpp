#include "qfolio/state_prep.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qfolio::prep {

using qsim::QuantumState;
using qsim::Register;
using qsim::RegisterLayout;

namespace {

Eigen::MatrixXcd rotation_block(double a) {
  const double c = std::sqrt(std::max(0.0, 1.0 - a * a));
  Eigen::MatrixXcd u(2, 2);
  u << c, -a, a, c;
  return u;
}

const Eigen::MatrixXcd kIdentity2 = Eigen::MatrixXcd::Identity(2, 2);
const Eigen::MatrixXcd kPauliX = (Eigen::MatrixXcd(2, 2) << 0, 1, 1, 0).finished();

Eigen::MatrixXcd hadamard_power(int k) {
  Eigen::MatrixXcd h(2, 2);
  const double s = 1.0 / std::numbers::sqrt2;
  h << s, s, s, -s;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (int i = 0; i < k; ++i) {
    Eigen::MatrixXcd next(out.rows() * 2, out.cols() * 2);
    next << h(0, 0) * out, h(0, 1) * out, h(1, 0) * out, h(1, 1) * out;
    out.swap(next);
  }
  return out;
}

/// XOR-loads oracle patterns into the data register, optionally only on the
/// branch where a control register equals control_val. Self-inverse.
QuantumState oracle_load(const QramOracle& o, const QuantumState& s,
                         std::span<const std::string> index_regs, std::string_view data_reg,
                         std::string_view control_reg = {}, std::uint64_t control_val = 0) {
  const RegisterLayout& lay = s.layout();
  if (lay.reg(data_reg).n_qubits != o.m_bits())
    throw std::invalid_argument("data register width does not match oracle m_bits");
  const int data_shift = lay.shift(data_reg);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(lay.dim());
  for (std::uint64_t i = 0; i < lay.dim(); ++i) {
    std::uint64_t j = i;
    if (control_reg.empty() || lay.extract(i, control_reg) == control_val) {
      std::uint64_t idx = 0;
      for (const auto& reg : index_regs) idx = (idx << lay.reg(reg).n_qubits) | lay.extract(i, reg);
      j = i ^ (o.pattern(idx) << data_shift);
    }
    out(j) = s.amplitudes()(i);
  }
  return QuantumState(lay, std::move(out));
}

struct PanelContext {
  int n_assets = 0, n_times = 0;       // true sizes
  int bits_t = 0, bits_s = 0;          // register widths
  std::uint64_t t_pad = 1, s_pad = 1;  // padded sizes
  double delta = 0.0;
  QramOracle oracle;                   // indexed by k = t * s_pad + s

  double y(std::uint64_t t, std::uint64_t s) const { return oracle.value(t * s_pad + s); }
};

PanelContext make_context(const market::ReturnsPanel& panel, const PrepOptions& opts) {
  PanelContext ctx;
  ctx.n_assets = panel.n_assets();
  ctx.n_times = panel.n_times();
  ctx.bits_t = qsim::ceil_log2(static_cast<std::uint64_t>(ctx.n_times));
  ctx.bits_s = qsim::ceil_log2(static_cast<std::uint64_t>(ctx.n_assets));
  ctx.t_pad = std::uint64_t{1} << ctx.bits_t;
  ctx.s_pad = std::uint64_t{1} << ctx.bits_s;

  std::vector<double> table(ctx.t_pad * ctx.s_pad, 0.0);
  for (int t = 0; t < ctx.n_times; ++t)
    for (int s = 0; s < ctx.n_assets; ++s)
      table[static_cast<std::uint64_t>(t) * ctx.s_pad + s] = panel.returns(s, t);
  ctx.oracle = opts.frac_bits ? QramOracle::fixed_point(std::move(table), *opts.frac_bits)
                              : QramOracle::exact(std::move(table));

  double max_abs = 0.0;
  for (std::uint64_t k = 0; k < ctx.t_pad * ctx.s_pad; ++k)
    max_abs = std::max(max_abs, std::abs(ctx.oracle.value(k)));
  if (max_abs == 0.0)
    throw std::runtime_error("all returns zero: post-selection on null branch");
  ctx.delta = opts.delta.value_or(1.0 / max_abs);
  if (!(ctx.delta > 0.0) || ctx.delta * max_abs > 1.0 + 1e-12)
    throw std::invalid_argument("delta must satisfy 0 < delta * max|y| <= 1");
  return ctx;
}

}  // namespace

QramOracle QramOracle::exact(std::vector<double> values) {
  QramOracle o;
  o.values_ = std::move(values);
  return o;
}

QramOracle QramOracle::fixed_point(std::vector<double> values, int frac_bits) {
  if (frac_bits < 1 || frac_bits > 52)
    throw std::invalid_argument("frac_bits must be in [1, 52]");
  QramOracle o;
  o.frac_bits_ = frac_bits;
  const double scale = std::pow(2.0, frac_bits);
  std::int64_t max_mag = 0;
  std::vector<std::int64_t> codes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    codes[i] = std::llround(values[i] * scale);
    max_mag = std::max(max_mag, std::abs(codes[i]));
  }
  int mag_bits = 1;
  while ((std::int64_t{1} << mag_bits) <= max_mag) ++mag_bits;
  o.m_bits_ = mag_bits + 1;  // sign bit
  o.values_.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) o.values_[i] = codes[i] / scale;
  return o;
}

double QramOracle::value(std::size_t i) const { return i < values_.size() ? values_[i] : 0.0; }

std::uint64_t QramOracle::pattern(std::size_t i) const {
  if (is_exact())
    throw std::invalid_argument("exact oracle has no bit encoding; use fixed_point mode");
  const double scale = std::pow(2.0, frac_bits_);
  const std::int64_t code = std::llround(value(i) * scale);
  const std::uint64_t mask = (std::uint64_t{1} << m_bits_) - 1;
  return static_cast<std::uint64_t>(code) & mask;
}

double QramOracle::decode(std::uint64_t pattern) const {
  if (is_exact())
    throw std::invalid_argument("exact oracle has no bit encoding; use fixed_point mode");
  std::int64_t code = static_cast<std::int64_t>(pattern);
  if (pattern & (std::uint64_t{1} << (m_bits_ - 1))) code -= std::int64_t{1} << m_bits_;
  return static_cast<double>(code) / std::pow(2.0, frac_bits_);
}

QuantumState oracle_query(const QramOracle& o, const QuantumState& s,
                          std::span<const std::string> index_regs, std::string_view data_reg) {
  const RegisterLayout& lay = s.layout();
  const std::uint64_t data_mask = lay.mask(data_reg) << lay.shift(data_reg);
  for (std::uint64_t i = 0; i < lay.dim(); ++i)
    if ((i & data_mask) != 0 && std::abs(s.amplitudes()(i)) > 1e-12)
      throw std::invalid_argument("data register occupied");
  return oracle_load(o, s, index_regs, data_reg);
}

QuantumState oracle_query(const QramOracle& o, const QuantumState& s,
                          std::initializer_list<std::string> index_regs,
                          std::string_view data_reg) {
  const std::vector<std::string> idx(index_regs);
  return oracle_query(o, s, std::span<const std::string>(idx), data_reg);
}

QuantumState oracle_query_inverse(const QramOracle& o, const QuantumState& s,
                                  std::span<const std::string> index_regs,
                                  std::string_view data_reg) {
  return oracle_load(o, s, index_regs, data_reg);
}

PrepOutcome prepare_chi(const market::ReturnsPanel& panel, const PrepOptions& opts) {
  const PanelContext ctx = make_context(panel, opts);
  const std::vector<std::string> ts{"t", "s"};

  QuantumState st = allocate_state(RegisterLayout{
      {"t", ctx.bits_t}, {"s", ctx.bits_s}, {"anc", 1}});
  st = hadamard_all(st, "t");
  st = hadamard_all(st, "s");

  if (opts.explicit_data_register) {
    if (ctx.oracle.is_exact())
      throw std::invalid_argument("explicit data register requires frac_bits");
    // Literal circuit: query -> rotate on the data value -> uncompute.
    st = [&] {
      QuantumState with_c = add_register(st, {"c", ctx.oracle.m_bits()});
      with_c = oracle_query(ctx.oracle, with_c, std::span<const std::string>(ts), "c");
      with_c = qsim::controlled_amplitude_rotation(
          with_c, "c", [&](std::uint64_t p) { return ctx.oracle.decode(p); }, "anc", ctx.delta);
      with_c = oracle_query_inverse(ctx.oracle, with_c, std::span<const std::string>(ts), "c");
      return postselect(with_c, "c", 0).first;  // deterministic after uncompute
    }();
  } else {
    // Collapsed form of the same round trip: the query is self-inverse, so the
    // net effect is a rotation keyed on the index registers with oracle values.
    st = qsim::controlled_amplitude_rotation(
        st, std::span<const std::string>(ts),
        [&](std::uint64_t k) { return ctx.oracle.value(k); }, "anc", ctx.delta);
  }

  auto [state, p] = postselect(st, "anc", 1);
  return PrepOutcome{std::move(state), p, ctx.delta};
}

PrepOutcome prepare_R_state(const PrepOutcome& chi, std::string_view t_register) {
  QuantumState st = hadamard_all(chi.state, t_register);
  auto [state, p] = postselect(st, t_register, 0);
  return PrepOutcome{std::move(state), p, chi.delta_used};
}

PrepOutcome prepare_chi_tilde(const market::ReturnsPanel& panel, const PrepOptions& opts) {
  const PanelContext ctx = make_context(panel, opts);
  if (panel.norm_y_tilde == 0.0)
    throw std::runtime_error("mean-adjusted returns all zero: post-selection on null branch");
  if (opts.explicit_data_register && ctx.oracle.is_exact())
    throw std::invalid_argument("explicit data register requires frac_bits");

  const std::vector<std::string> bs{"b", "s"};
  const std::vector<std::string> ts{"t", "s"};
  const Eigen::MatrixXcd h_b = hadamard_power(ctx.bits_t);
  const Eigen::MatrixXcd id_b = Eigen::MatrixXcd::Identity(ctx.t_pad, ctx.t_pad);

  std::vector<Register> regs{{"t", ctx.bits_t}, {"s", ctx.bits_s}, {"a", 1},
                             {"b", ctx.bits_t}};
  if (opts.explicit_data_register) regs.push_back({"c", ctx.oracle.m_bits()});
  regs.push_back({"d", 1});
  regs.push_back({"e", 1});

  QuantumState st = allocate_state(RegisterLayout(regs));
  st = hadamard_all(st, "t");
  st = hadamard_all(st, "s");
  st = hadamard_all(st, "a");

  // Hadamards on b conditioned on a = 1.
  st = keyed_unitary(st, {"a"}, {"b"}, [&](std::uint64_t a) { return a ? h_b : id_b; });

  if (opts.explicit_data_register) {
    // a = 1 branch: load y_s(t') into c, rotate d keyed on c, uncompute c.
    st = oracle_load(ctx.oracle, st, std::span<const std::string>(bs), "c", "a", 1);
    st = keyed_unitary(st, {"a", "c"}, {"d"}, [&](std::uint64_t key) -> Eigen::MatrixXcd {
      const std::uint64_t a = key >> ctx.oracle.m_bits();
      if (!a) return kIdentity2;
      return rotation_block(ctx.delta * ctx.oracle.decode(key & ((std::uint64_t{1} << ctx.oracle.m_bits()) - 1)));
    });
    st = oracle_load(ctx.oracle, st, std::span<const std::string>(bs), "c", "a", 1);
  } else {
    st = keyed_unitary(st, {"a", "b", "s"}, {"d"}, [&](std::uint64_t key) -> Eigen::MatrixXcd {
      const std::uint64_t a = key >> (ctx.bits_t + ctx.bits_s);
      if (!a) return kIdentity2;
      const std::uint64_t b = (key >> ctx.bits_s) & (ctx.t_pad - 1);
      const std::uint64_t s = key & (ctx.s_pad - 1);
      return rotation_block(ctx.delta * ctx.y(b, s));
    });
  }
  // a = 0 branch: d flips to |1⟩.
  st = keyed_unitary(st, {"a"}, {"d"},
                     [&](std::uint64_t a) { return a ? kIdentity2 : kPauliX; });

  // Second controlled Hadamards on b.
  st = keyed_unitary(st, {"a"}, {"b"}, [&](std::uint64_t a) { return a ? h_b : id_b; });

  // Second ancilla rotation: a = 0 branch rotates e keyed on (t, s).
  if (opts.explicit_data_register) {
    st = oracle_load(ctx.oracle, st, std::span<const std::string>(ts), "c", "a", 0);
    st = keyed_unitary(st, {"a", "c"}, {"e"}, [&](std::uint64_t key) -> Eigen::MatrixXcd {
      const std::uint64_t a = key >> ctx.oracle.m_bits();
      if (a) return kIdentity2;
      return rotation_block(ctx.delta * ctx.oracle.decode(key & ((std::uint64_t{1} << ctx.oracle.m_bits()) - 1)));
    });
    st = oracle_load(ctx.oracle, st, std::span<const std::string>(ts), "c", "a", 0);
  } else {
    st = keyed_unitary(st, {"a", "t", "s"}, {"e"}, [&](std::uint64_t key) -> Eigen::MatrixXcd {
      const std::uint64_t a = key >> (ctx.bits_t + ctx.bits_s);
      if (a) return kIdentity2;
      const std::uint64_t t = (key >> ctx.bits_s) & (ctx.t_pad - 1);
      const std::uint64_t s = key & (ctx.s_pad - 1);
      return rotation_block(ctx.delta * ctx.y(t, s));
    });
  }
  // a = 1 branch: e flips to |1⟩.
  st = keyed_unitary(st, {"a"}, {"e"},
                     [&](std::uint64_t a) { return a ? kPauliX : kIdentity2; });

  // Post-selection. The ancilla a is projected onto (|0⟩ - |1⟩)/√2 so the two
  // branches subtract, leaving y_s(t) minus the time mean.
  Eigen::VectorXcd minus(2);
  minus << 1.0 / std::numbers::sqrt2, -1.0 / std::numbers::sqrt2;
  double p = 1.0;
  auto [st_a, pa] = postselect_projector(st, "a", minus);
  p *= pa;
  auto [st_b, pb] = postselect(st_a, "b", 0);
  p *= pb;
  if (opts.explicit_data_register) {
    auto [st_c, pc] = postselect(st_b, "c", 0);
    p *= pc;
    st_b = std::move(st_c);
  }
  auto [st_d, pd] = postselect(st_b, "d", 1);
  p *= pd;
  auto [st_e, pe] = postselect(st_d, "e", 1);
  p *= pe;

  return PrepOutcome{std::move(st_e), p, ctx.delta};
}

qsim::DensityMatrix covariance_density(const PrepOutcome& chi_tilde) {
  return partial_trace(chi_tilde.state, {"t"});
}

double estimate_trace_sigma(double p_chi_tilde, double delta, int n_times, int n_assets) {
  if (n_times == 1) throw std::invalid_argument("T = 1: trace formula undefined");
  if (n_times < 1 || n_assets < 1) throw std::invalid_argument("T and N must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (p_chi_tilde < 0.0) throw std::invalid_argument("probability must be non-negative");
  return 4.0 * n_times * n_assets * p_chi_tilde / (delta * delta * (n_times - 1));
}

KPTree kp_build(const Eigen::VectorXd& v) {
  if (v.size() < 1) throw std::invalid_argument("empty vector");
  if (v.norm() == 0.0) throw std::invalid_argument("zero vector");

  KPTree tree;
  tree.n_values = static_cast<std::size_t>(v.size());
  tree.depth = qsim::ceil_log2(tree.n_values);
  const std::size_t leaves = std::size_t{1} << tree.depth;

  tree.levels.resize(tree.depth + 1);
  tree.levels[tree.depth].assign(leaves, 0.0);
  tree.leaf_signs.assign(leaves, 1.0);
  for (std::size_t i = 0; i < tree.n_values; ++i) {
    tree.levels[tree.depth][i] = v(i) * v(i);
    tree.leaf_signs[i] = v(i) < 0.0 ? -1.0 : 1.0;
  }
  for (int level = tree.depth - 1; level >= 0; --level) {
    tree.levels[level].resize(std::size_t{1} << level);
    for (std::size_t j = 0; j < tree.levels[level].size(); ++j)
      tree.levels[level][j] = tree.levels[level + 1][2 * j] + tree.levels[level + 1][2 * j + 1];
  }
  return tree;
}

void kp_update(KPTree& tree, std::size_t index, double new_value) {
  if (index >= tree.n_values) throw std::invalid_argument("index out of range");
  tree.levels[tree.depth][index] = new_value * new_value;
  tree.leaf_signs[index] = new_value < 0.0 ? -1.0 : 1.0;
  std::size_t j = index;
  for (int level = tree.depth - 1; level >= 0; --level) {
    j /= 2;
    tree.levels[level][j] = tree.levels[level + 1][2 * j] + tree.levels[level + 1][2 * j + 1];
  }
}

qsim::QuantumState kp_prepare(const KPTree& tree) {
  if (tree.root() <= 0.0) throw std::invalid_argument("zero vector");
  const int k = tree.depth;

  std::vector<Register> qubit_regs;
  qubit_regs.reserve(k);
  for (int i = 0; i < k; ++i) qubit_regs.push_back({"v" + std::to_string(i), 1});
  QuantumState st =
      k == 0 ? allocate_state(RegisterLayout{{"v", 0}}) : allocate_state(RegisterLayout(qubit_regs));

  for (int level = 0; level < k; ++level) {
    std::vector<std::string> keys;
    for (int i = 0; i < level; ++i) keys.push_back("v" + std::to_string(i));
    const std::vector<std::string> target{"v" + std::to_string(level)};
    st = keyed_unitary(st, std::span<const std::string>(keys), std::span<const std::string>(target),
                       [&](std::uint64_t prefix) -> Eigen::MatrixXcd {
                         const double parent = tree.levels[level][prefix];
                         if (parent <= 0.0) return kIdentity2;
                         const double left = tree.levels[level + 1][2 * prefix];
                         const double right = tree.levels[level + 1][2 * prefix + 1];
                         const double c = std::sqrt(left / parent);
                         const double s = std::sqrt(right / parent);
                         Eigen::MatrixXcd u(2, 2);
                         u << c, -s, s, c;
                         return u;
                       });
  }

  // Leaf-level sign flip (diagonal ±1 unitary).
  Eigen::VectorXcd amps = st.amplitudes();
  for (Eigen::Index i = 0; i < amps.size(); ++i) amps(i) *= tree.leaf_signs[i];
  return qsim::relabel(QuantumState(st.layout(), std::move(amps)), RegisterLayout{{"v", k}});
}

Eigen::MatrixXd kp_rotation_cascade(const KPTree& tree) {
  if (tree.root() <= 0.0) throw std::invalid_argument("zero vector");
  const int n = static_cast<int>(tree.n_values);
  Eigen::MatrixXd v_mat = Eigen::MatrixXd::Identity(n, n);

  for (int level = 0; level < tree.depth; ++level) {
    const std::size_t width = std::size_t{1} << (tree.depth - level);  // leaves per node
    for (std::size_t j = 0; j < tree.levels[level].size(); ++j) {
      const double parent = tree.levels[level][j];
      if (parent <= 0.0) continue;
      const double left = tree.levels[level + 1][2 * j];
      const double right = tree.levels[level + 1][2 * j + 1];
      if (right == 0.0) continue;  // rotation angle 0
      const std::size_t rep_left = j * width;
      const std::size_t rep_right = rep_left + width / 2;
      if (rep_right >= static_cast<std::size_t>(n))
        throw std::logic_error("padded subtree with nonzero subnorm");
      const double c = std::sqrt(left / parent);
      const double s = std::sqrt(right / parent);
      Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
      g(rep_left, rep_left) = c;
      g(rep_left, rep_right) = -s;
      g(rep_right, rep_left) = s;
      g(rep_right, rep_right) = c;
      v_mat = g * v_mat;
    }
  }
  for (int i = 0; i < n; ++i) v_mat.row(i) *= tree.leaf_signs[i];
  return v_mat;
}

}  // namespace qfolio::prep
