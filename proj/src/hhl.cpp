#include "qfolio/hhl.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qfolio::hhl {

using qsim::DensityMatrix;
using qsim::QuantumState;
using qsim::Register;
using qsim::RegisterLayout;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXcd rotation_block(double a) {
  const double c = std::sqrt(std::max(0.0, 1.0 - a * a));
  Eigen::MatrixXcd u(2, 2);
  u << c, -a, a, c;
  return u;
}

double gershgorin_bound(const Eigen::MatrixXd& m) {
  double best = 0.0;
  for (int i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).cwiseAbs().sum());
  return best;
}

Eigen::MatrixXd pad_hamiltonian(const Eigen::MatrixXd& m, int dim_pad) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_pad, dim_pad);
  out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

Eigen::MatrixXcd pad_unitary(const Eigen::MatrixXcd& m, int dim_pad) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(dim_pad, dim_pad);
  out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

Eigen::MatrixXcd dft_matrix(int n_qubits) {
  const Eigen::Index d = Eigen::Index{1} << n_qubits;
  Eigen::MatrixXcd f(d, d);
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k)
      f(j, k) = std::polar(norm, 2.0 * kPi * static_cast<double>(j * k) / static_cast<double>(d));
  return f;
}

Eigen::MatrixXcd hadamard_dense(int k) {
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

/// exp(+i S delta) on two equal q-qubit registers; S is an involution.
Eigen::MatrixXcd partial_swap(int q, double delta) {
  const Eigen::Index d = Eigen::Index{1} << q;
  const Eigen::Index dd = d * d;
  Eigen::MatrixXcd u = std::cos(delta) * Eigen::MatrixXcd::Identity(dd, dd);
  const std::complex<double> is(0.0, std::sin(delta));
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) u(i * d + j, j * d + i) += is;
  return u;
}

struct DensityPipelineArgs {
  Eigen::MatrixXcd rho_m;       // Hamiltonian state for the Sigma part, dim 2^q
  Eigen::VectorXd r_hat;        // R / Tr M
  Eigen::VectorXd pi_hat;       // budget / Tr M
  int dim = 0;                  // N + 2
  int q = 0;
  int n_phase = 0;
  double t0 = 0.0;
  int swap_steps = 0;
  double time_scale = 1.0;      // tr Sigma / Tr M (unity for the KKT matrix)
};

/// Controlled e^{±i M_hat k t0} at the channel level: per phase bit j the
/// partial-swap + star Trotter step runs swap_steps * 2^j times.
DensityMatrix controlled_evolution_density(DensityMatrix dm, const DensityPipelineArgs& a,
                                           bool inverse) {
  const double tau = (inverse ? -1.0 : 1.0) * a.t0 / a.swap_steps;
  const Eigen::Index dq = Eigen::Index{1} << a.q;
  const Eigen::MatrixXcd id_pair = Eigen::MatrixXcd::Identity(dq * dq, dq * dq);
  const Eigen::MatrixXcd id_x = Eigen::MatrixXcd::Identity(dq, dq);
  const Eigen::MatrixXcd swap_u = partial_swap(a.q, tau * a.time_scale);
  const Eigen::MatrixXcd u_r =
      pad_unitary(hsim::star_exponential(a.r_hat, 1, a.dim, -tau), dq);
  const Eigen::MatrixXcd u_pi =
      pad_unitary(hsim::star_exponential(a.pi_hat, 2, a.dim, -tau), dq);

  const auto bit_block = [&](std::uint64_t k, int j, const Eigen::MatrixXcd& u,
                             const Eigen::MatrixXcd& id) -> Eigen::MatrixXcd {
    return ((k >> j) & 1) ? u : id;
  };

  std::vector<int> bit_order(a.n_phase);
  for (int j = 0; j < a.n_phase; ++j) bit_order[j] = j;
  if (inverse) std::reverse(bit_order.begin(), bit_order.end());

  for (const int j : bit_order) {
    const std::uint64_t reps = static_cast<std::uint64_t>(a.swap_steps) << j;
    for (std::uint64_t rep = 0; rep < reps; ++rep) {
      if (!inverse) {
        dm = attach_register(dm, {"copy", a.q}, a.rho_m);
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"},
                           std::vector<std::string>{"x", "copy"},
                           [&](std::uint64_t k) { return bit_block(k, j, swap_u, id_pair); });
        dm = partial_trace(dm, std::vector<std::string>{"copy"});
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"}, std::vector<std::string>{"x"},
                           [&](std::uint64_t k) { return bit_block(k, j, u_r, id_x); });
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"}, std::vector<std::string>{"x"},
                           [&](std::uint64_t k) { return bit_block(k, j, u_pi, id_x); });
      } else {
        // adjoint circuit: reversed factor order, negated times (already in tau)
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"}, std::vector<std::string>{"x"},
                           [&](std::uint64_t k) { return bit_block(k, j, u_pi, id_x); });
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"}, std::vector<std::string>{"x"},
                           [&](std::uint64_t k) { return bit_block(k, j, u_r, id_x); });
        dm = attach_register(dm, {"copy", a.q}, a.rho_m);
        dm = keyed_unitary(dm, std::vector<std::string>{"phase"},
                           std::vector<std::string>{"x", "copy"},
                           [&](std::uint64_t k) { return bit_block(k, j, swap_u, id_pair); });
        dm = partial_trace(dm, std::vector<std::string>{"copy"});
      }
    }
  }
  return dm;
}

}  // namespace

void HHLConfig::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (resolved_c() > 1.0 / kappa + 1e-12)
    throw std::invalid_argument("c_constant must be <= 1/kappa");
  if (!(resolved_c() > 0.0)) throw std::invalid_argument("c_constant must be positive");
  if (n_phase_bits < 3 || n_phase_bits > 12)
    throw std::invalid_argument("n_phase_bits must be in [3, 12]");
  if (trotter_steps < 1) throw std::invalid_argument("trotter_steps must be >= 1");
  if (swap_steps < 1) throw std::invalid_argument("swap_steps must be >= 1");
  if (t0 && !(*t0 > 0.0)) throw std::invalid_argument("t0 must be positive");
}

QuantumState prepare_rhs(double mu, double xi, int dim) {
  if (mu == 0.0 && xi == 0.0) throw std::invalid_argument("rhs must be nonzero");
  if (dim < 2) throw std::invalid_argument("dim must be >= 2");
  const int q = qsim::ceil_log2(static_cast<std::uint64_t>(dim));
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(Eigen::Index{1} << q);
  const double norm = std::hypot(mu, xi);
  amps(0) = mu / norm;
  amps(1) = xi / norm;
  return QuantumState(RegisterLayout{{"x", q}}, std::move(amps));
}

QuantumState phase_estimation(const hsim::BlockUnitary& evolution, const QuantumState& rhs,
                              int n_phase_bits) {
  if (n_phase_bits < 3 || n_phase_bits > 12)
    throw std::invalid_argument("n_phase_bits must be in [3, 12]");
  if (evolution.blocks.size() != (std::uint64_t{1} << n_phase_bits))
    throw std::invalid_argument("controlled evolution does not match phase register size");
  if (static_cast<std::uint64_t>(evolution.blocks.front().rows()) != rhs.layout().dim())
    throw std::invalid_argument("evolution blocks do not match rhs dimension");

  QuantumState st = prepend_register(rhs, {"phase", n_phase_bits});
  st = hadamard_all(st, "phase");
  st = keyed_unitary(st, {"phase"}, {"x"},
                     [&](std::uint64_t k) { return evolution.blocks[k]; });
  return qft(st, "phase", /*inverse=*/true);
}

double decode_eigenvalue(std::uint64_t m, int n_phase_bits, double t0) {
  const double d = static_cast<double>(std::uint64_t{1} << n_phase_bits);
  double frac = static_cast<double>(m) / d;
  if (frac >= 0.5) frac -= 1.0;  // two's complement: [-1/2, 1/2)
  return 2.0 * kPi * frac / t0;
}

QuantumState eigenvalue_inversion(const QuantumState& pe_state, double kappa, double c_constant,
                                  double t0) {
  const int n = pe_state.layout().reg("phase").n_qubits;
  const Eigen::MatrixXcd id2 = Eigen::MatrixXcd::Identity(2, 2);
  QuantumState st = add_register(pe_state, {"flag", 1});
  return keyed_unitary(st, {"phase"}, {"flag"}, [&](std::uint64_t m) -> Eigen::MatrixXcd {
    if (m == 0) return id2;
    const double lambda = decode_eigenvalue(m, n, t0);
    if (std::abs(lambda) < 1.0 / kappa) return id2;  // hard filter
    const double a = c_constant / lambda;
    if (std::abs(a) > 1.0 + 1e-12) throw std::runtime_error("C too large for kappa");
    return rotation_block(a);
  });
}

double rescale_factor(double p_w, double mu, double xi, double c_constant, double trace_sigma) {
  if (!(p_w > 0.0)) throw std::invalid_argument("p_w must be positive");
  if (!(trace_sigma > 0.0)) throw std::invalid_argument("trace_sigma must be positive");
  if (c_constant == 0.0) throw std::invalid_argument("c_constant must be nonzero");
  return std::sqrt(p_w * (mu * mu + xi * xi) / (c_constant * c_constant)) * trace_sigma;
}

HHLResult hhl_solve(const qp::KKTSystem& kkt, const HHLConfig& cfg) {
  cfg.validate();
  const int dim = kkt.n_assets() + 2;
  const int q = qsim::ceil_log2(static_cast<std::uint64_t>(dim));
  const int dim_pad = 1 << q;
  const double tr_m = kkt.trace();
  const double trace_sigma = tr_m;  // zero constraint block: Tr M = tr Sigma

  const Eigen::MatrixXd m_hat_pad = pad_hamiltonian(kkt.m_hat, dim_pad);
  const double t0 = cfg.t0.value_or(kPi / (2.0 * gershgorin_bound(m_hat_pad)));
  const double c_used = cfg.resolved_c();

  // Classical diagnostics: spectrum, kappa-truncated oracle, aliasing check.
  const Eigen::VectorXd b_hat = kkt.rhs / kkt.rhs.norm();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kkt.m_hat);
  HHLResult result{qsim::allocate_state(RegisterLayout{{"x", q}})};
  for (int j = 0; j < dim; ++j)
    result.spectrum.push_back({es.eigenvalues()(j), es.eigenvectors().col(j).dot(b_hat)});
  auto [x_kappa, eps_kappa] = qp::pseudo_inverse_kappa(kkt.m_hat, b_hat, cfg.kappa);
  result.epsilon_kappa = eps_kappa;
  const double max_phase = es.eigenvalues().cwiseAbs().maxCoeff() * t0 / (2.0 * kPi);
  if (max_phase >= 0.5)
    result.aliasing_warning = "eigenphase |lambda| t0 / 2pi = " + std::to_string(max_phase) +
                              " outside [-1/2, 1/2): phase estimates alias";

  const QuantumState rhs_state = prepare_rhs(kkt.mu, kkt.xi, dim);

  double p_w = 0.0;
  double p_cleanup = 1.0;
  if (cfg.backend != Backend::density_exp) {
    std::function<Eigen::MatrixXcd(double)> evolution;
    if (cfg.backend == Backend::exact) {
      // QPE convention: blocks are e^{+i M_hat tau}.
      evolution = [&](double tau) { return hsim::exact_evolution(m_hat_pad, -tau); };
    } else {
      hsim::HamiltonianParts parts =
          hsim::build_parts(kkt.return_vector() / tr_m, kkt.budget_vector() / tr_m,
                            kkt.sigma() / tr_m);
      // zero-pad the parts onto the 2^q register
      Eigen::VectorXd r_pad = Eigen::VectorXd::Zero(dim_pad - 2);
      Eigen::VectorXd pi_pad = Eigen::VectorXd::Zero(dim_pad - 2);
      r_pad.head(dim - 2) = kkt.return_vector() / tr_m;
      pi_pad.head(dim - 2) = kkt.budget_vector() / tr_m;
      Eigen::MatrixXd sigma_pad = Eigen::MatrixXd::Zero(dim_pad - 2, dim_pad - 2);
      sigma_pad.topLeftCorner(dim - 2, dim - 2) = kkt.sigma() / tr_m;
      const hsim::HamiltonianParts parts_pad = hsim::build_parts(r_pad, pi_pad, sigma_pad);
      const int steps_per_t0 = cfg.trotter_steps;
      evolution = [parts_pad, steps_per_t0, t0](double tau) {
        const int steps =
            std::max(1, static_cast<int>(std::lround(steps_per_t0 * std::abs(tau) / t0)));
        return hsim::trotter_evolution(parts_pad, -tau, steps).unitary;
      };
    }

    std::vector<double> t_list(cfg.n_phase_bits);
    for (int j = 0; j < cfg.n_phase_bits; ++j)
      t_list[j] = t0 * static_cast<double>(std::uint64_t{1} << j);
    const hsim::BlockUnitary bu = hsim::controlled_evolution(evolution, t_list);

    QuantumState st = phase_estimation(bu, rhs_state, cfg.n_phase_bits);
    st = eigenvalue_inversion(st, cfg.kappa, c_used, t0);

    // Uncompute the phase register: inverse of (H, controlled-U, IQFT).
    st = qft(st, "phase", /*inverse=*/false);
    st = keyed_unitary(st, {"phase"}, {"x"},
                       [&](std::uint64_t k) { return bu.blocks[k].adjoint().eval(); });
    st = hadamard_all(st, "phase");

    auto [flagged, pw] = postselect(st, "flag", 1);
    p_w = pw;
    auto [clean, p0] = postselect(flagged, "phase", 0);
    p_cleanup = p0;
    result.solution_state = std::move(clean);
    result.solution_purity = 1.0;
  } else {
    if (cfg.n_phase_bits + 2 * q > 10)
      throw std::invalid_argument(
          "density_exp backend limited to n_phase_bits + 2*ceil_log2(N+2) <= 10");

    DensityPipelineArgs args;
    args.dim = dim;
    args.q = q;
    args.n_phase = cfg.n_phase_bits;
    args.t0 = t0;
    args.swap_steps = cfg.swap_steps;
    args.time_scale = trace_sigma / tr_m;
    args.r_hat = kkt.return_vector() / tr_m;
    args.pi_hat = kkt.budget_vector() / tr_m;
    Eigen::MatrixXd rho_m = Eigen::MatrixXd::Zero(dim_pad, dim_pad);
    rho_m.block(2, 2, dim - 2, dim - 2) = kkt.sigma() / trace_sigma;
    args.rho_m = rho_m.cast<std::complex<double>>();

    const RegisterLayout lay{{"phase", cfg.n_phase_bits}, {"x", q}};
    Eigen::VectorXcd full0 = Eigen::VectorXcd::Zero(lay.dim());
    full0.head(rhs_state.amplitudes().size()) = rhs_state.amplitudes();
    DensityMatrix dm(lay, full0 * full0.adjoint(), DensityMatrix::Unchecked{});

    const Eigen::MatrixXcd h_phase = hadamard_dense(cfg.n_phase_bits);
    const Eigen::MatrixXcd f_phase = dft_matrix(cfg.n_phase_bits);
    const std::vector<std::string> phase_tgt{"phase"};

    dm = apply_unitary(dm, h_phase, phase_tgt);
    dm = controlled_evolution_density(std::move(dm), args, /*inverse=*/false);
    dm = apply_unitary(dm, f_phase.adjoint(), phase_tgt);  // inverse QFT

    // eigenvalue inversion at the channel level
    dm = attach_register(dm, {"flag", 1}, (Eigen::MatrixXcd(2, 2) << 1, 0, 0, 0).finished());
    const Eigen::MatrixXcd id2 = Eigen::MatrixXcd::Identity(2, 2);
    dm = keyed_unitary(dm, std::vector<std::string>{"phase"}, std::vector<std::string>{"flag"},
                       [&](std::uint64_t m) -> Eigen::MatrixXcd {
                         if (m == 0) return id2;
                         const double lambda = decode_eigenvalue(m, cfg.n_phase_bits, t0);
                         if (std::abs(lambda) < 1.0 / cfg.kappa) return id2;
                         return rotation_block(c_used / lambda);
                       });

    dm = apply_unitary(dm, f_phase, phase_tgt);  // forward QFT
    dm = controlled_evolution_density(std::move(dm), args, /*inverse=*/true);
    dm = apply_unitary(dm, h_phase, phase_tgt);

    auto [flagged, pw] = postselect(dm, "flag", 1);
    p_w = pw;
    auto [clean, p0] = postselect(flagged, "phase", 0);
    p_cleanup = p0;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sol_es(clean.matrix());
    Eigen::VectorXcd top = sol_es.eigenvectors().col(dim_pad - 1);
    // fix the global phase for reproducibility
    Eigen::Index imax = 0;
    top.cwiseAbs().maxCoeff(&imax);
    top *= std::polar(1.0, -std::arg(top(imax)));
    top /= top.norm();
    result.solution_state = QuantumState(RegisterLayout{{"x", q}}, std::move(top));
    result.solution_purity = clean.purity();
  }

  result.p_w = p_w;
  result.phase_cleanup_probability = p_cleanup;
  result.rescale = rescale_factor(p_w, kkt.mu, kkt.xi, c_used, trace_sigma);

  Eigen::VectorXcd x_kappa_pad = Eigen::VectorXcd::Zero(dim_pad);
  x_kappa_pad.head(dim) = x_kappa.cast<std::complex<double>>();
  if (x_kappa_pad.norm() > 0.0) {
    x_kappa_pad /= x_kappa_pad.norm();
    result.fidelity_vs_oracle =
        std::norm(x_kappa_pad.dot(result.solution_state.amplitudes()));
  }

  result.t0_used = t0;
  result.n_phase_bits = cfg.n_phase_bits;
  result.backend = cfg.backend;
  result.kappa = cfg.kappa;
  result.c_used = c_used;
  result.mu = kkt.mu;
  result.xi = kkt.xi;
  result.trace_sigma = trace_sigma;
  result.n_assets = kkt.n_assets();
  return result;
}

std::pair<QuantumState, double> extract_w(const HHLResult& result) {
  const int n = result.n_assets;
  if (n < 1) throw std::invalid_argument("result carries no asset count");
  const Eigen::VectorXcd& amps = result.solution_state.amplitudes();
  const Eigen::VectorXcd w_slice = amps.segment(2, n);
  const double prob = w_slice.squaredNorm();
  if (prob < 1e-14) throw std::runtime_error("zero asset block");

  const int qw = qsim::ceil_log2(static_cast<std::uint64_t>(n));
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(Eigen::Index{1} << qw);
  w.head(n) = w_slice / std::sqrt(prob);
  return {QuantumState(RegisterLayout{{"w", qw}}, std::move(w)), prob};
}

}  // namespace qfolio::hhl
