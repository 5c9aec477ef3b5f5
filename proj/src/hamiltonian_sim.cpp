#include "qfolio/hamiltonian_sim.hpp"

#include "qfolio/state_prep.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qfolio::hsim {

namespace {

void check_star_args(const Eigen::VectorXd& v, int center, int dim) {
  if (v.size() < 1) throw std::invalid_argument("empty weight vector");
  if (v.norm() == 0.0) throw std::invalid_argument("zero weight vector");
  if (center != 1 && center != 2) throw std::invalid_argument("center must be 1 or 2");
  if (dim != static_cast<int>(v.size()) + 2)
    throw std::invalid_argument("dim must be N + 2");
}

}  // namespace

Eigen::MatrixXd star_matrix(const Eigen::VectorXd& v, int center, int dim) {
  check_star_args(v, center, dim);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  const int c = center - 1;
  h.row(c).tail(v.size()) = v.transpose();
  h.col(c).tail(v.size()) = v;
  return h;
}

StarEigensystem star_eigensystem(const Eigen::VectorXd& v, int center, int dim) {
  check_star_args(v, center, dim);
  StarEigensystem e;
  e.lambda_plus = v.norm();
  e.lambda_minus = -e.lambda_plus;
  const int c = center - 1;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  e.eigvec_plus = Eigen::VectorXd::Zero(dim);
  e.eigvec_minus = Eigen::VectorXd::Zero(dim);
  e.eigvec_plus(c) = inv_sqrt2;
  e.eigvec_minus(c) = inv_sqrt2;
  e.eigvec_plus.tail(v.size()) = inv_sqrt2 * v / e.lambda_plus;
  e.eigvec_minus.tail(v.size()) = inv_sqrt2 * v / e.lambda_minus;
  return e;
}

Eigen::MatrixXcd star_exponential(const Eigen::VectorXd& v, int center, int dim, double t) {
  check_star_args(v, center, dim);
  const int n = static_cast<int>(v.size());
  const int c = center - 1;
  const double lambda = v.norm();

  // Hadamard-type mixing between |center⟩ and |3⟩ (index 2).
  Eigen::MatrixXd hd = Eigen::MatrixXd::Identity(dim, dim);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  hd(c, c) = inv_sqrt2;
  hd(c, 2) = inv_sqrt2;
  hd(2, c) = inv_sqrt2;
  hd(2, 2) = -inv_sqrt2;

  // |3⟩ -> |v̂⟩ on the asset slots via the subnorm-tree rotation cascade.
  Eigen::MatrixXd v_emb = Eigen::MatrixXd::Identity(dim, dim);
  v_emb.block(2, 2, n, n) = prep::kp_rotation_cascade(prep::kp_build(v));

  const Eigen::MatrixXd w = v_emb * hd;  // |c⟩ -> |λ+⟩, |3⟩ -> |λ-⟩

  Eigen::VectorXcd phases = Eigen::VectorXcd::Ones(dim);
  phases(c) = std::polar(1.0, -lambda * t);
  phases(2) = std::polar(1.0, +lambda * t);

  return w * phases.asDiagonal() * w.transpose();
}

HamiltonianParts build_parts(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                             const Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(r.size());
  if (pi.size() != n || sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("dimension mismatch");
  HamiltonianParts parts;
  parts.h_sigma = Eigen::MatrixXd::Zero(n + 2, n + 2);
  parts.h_sigma.bottomRightCorner(n, n) = 0.5 * (sigma + sigma.transpose());
  parts.h_r = star_matrix(r, 1, n + 2);
  parts.h_pi = star_matrix(pi, 2, n + 2);
  return parts;
}

Eigen::MatrixXcd exact_evolution(const Eigen::MatrixXd& h, double t) {
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("hamiltonian must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  Eigen::VectorXcd phases(h.rows());
  for (int j = 0; j < h.rows(); ++j) phases(j) = std::polar(1.0, -es.eigenvalues()(j) * t);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().transpose();
}

SimulatedEvolution trotter_evolution(const HamiltonianParts& parts, double t, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  const int dim = parts.dim();
  const int n = dim - 2;
  const double dt = t / n_steps;

  const Eigen::MatrixXcd u_sigma = exact_evolution(parts.h_sigma, dt);
  const Eigen::VectorXd r = parts.h_r.row(0).tail(n);
  const Eigen::VectorXd pi = parts.h_pi.row(1).tail(n);
  const Eigen::MatrixXcd u_r = r.norm() > 0 ? star_exponential(r, 1, dim, dt)
                                            : Eigen::MatrixXcd::Identity(dim, dim).eval();
  const Eigen::MatrixXcd u_pi = pi.norm() > 0 ? star_exponential(pi, 2, dim, dt)
                                              : Eigen::MatrixXcd::Identity(dim, dim).eval();

  const Eigen::MatrixXcd step = u_sigma * u_r * u_pi;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
  for (int k = 0; k < n_steps; ++k) u = step * u;

  SimulatedEvolution evo;
  evo.t_total = t;
  evo.method = EvolutionMethod::trotter;
  evo.error_bound = operator_norm(u - exact_evolution(parts.sum(), t));
  evo.unitary = std::move(u);
  evo.n_steps = n_steps;
  return evo;
}

Eigen::MatrixXcd density_exponentiation_step_matrix(const Eigen::MatrixXcd& rho,
                                                    const Eigen::MatrixXcd& sigma, double dt) {
  const Eigen::Index d = rho.rows();
  if (rho.cols() != d || sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("dimension mismatch");

  // e^{-iS dt} = cos(dt) I - i sin(dt) S since the swap S is an involution.
  const double c = std::cos(dt);
  const double s = std::sin(dt);
  const std::complex<double> i_unit(0.0, 1.0);

  // Build A = e^{-iS dt} (rho ⊗ sigma) e^{+iS dt} and trace out the first factor.
  // Index convention: (a, b) -> a * d + b, S |a,b⟩ = |b,a⟩.
  const Eigen::Index dd = d * d;
  Eigen::MatrixXcd kron(dd, dd);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      kron.block(a * d, b * d, d, d) = rho(a, b) * sigma;

  const auto swapped_row = [d](Eigen::Index i) { return (i % d) * d + i / d; };
  Eigen::MatrixXcd left(dd, dd);  // e^{-iS dt} * kron
  for (Eigen::Index i = 0; i < dd; ++i)
    left.row(i) = c * kron.row(i) - i_unit * s * kron.row(swapped_row(i));
  Eigen::MatrixXcd full(dd, dd);  // left * e^{+iS dt}
  for (Eigen::Index j = 0; j < dd; ++j)
    full.col(j) = c * left.col(j) + i_unit * s * left.col(swapped_row(j));

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) out += full.block(a * d, a * d, d, d);
  return out;
}

qsim::DensityMatrix density_exponentiation_step(const qsim::DensityMatrix& rho,
                                                const qsim::DensityMatrix& sigma, double dt) {
  if (rho.layout().dim() != sigma.layout().dim())
    throw std::invalid_argument("dimension mismatch");
  Eigen::MatrixXcd out = density_exponentiation_step_matrix(rho.matrix(), sigma.matrix(), dt);
  out = 0.5 * (out + out.adjoint()).eval();
  return qsim::DensityMatrix(sigma.layout(), std::move(out), qsim::DensityMatrix::Unchecked{});
}

qsim::DensityMatrix simulate_density_hamiltonian(const qsim::DensityMatrix& rho,
                                                 const qsim::DensityMatrix& sigma0, double t,
                                                 int n_copies) {
  if (n_copies < 1) throw std::invalid_argument("n_copies must be >= 1");
  const double dt = t / n_copies;
  qsim::DensityMatrix sigma = sigma0;
  for (int k = 0; k < n_copies; ++k) sigma = density_exponentiation_step(rho, sigma, dt);
  return sigma;
}

Eigen::MatrixXcd BlockUnitary::dense() const {
  const Eigen::Index d = blocks.front().rows();
  const Eigen::Index total = static_cast<Eigen::Index>(blocks.size()) * d;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(total, total);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    out.block(k * d, k * d, d, d) = blocks[k];
  return out;
}

BlockUnitary controlled_evolution(const std::function<Eigen::MatrixXcd(double)>& evolution,
                                  const std::vector<double>& t_list) {
  if (t_list.empty()) throw std::invalid_argument("t_list must be non-empty");
  for (std::size_t j = 0; j < t_list.size(); ++j) {
    const double expected = t_list[0] * static_cast<double>(std::uint64_t{1} << j);
    if (std::abs(t_list[j] - expected) > 1e-12 * std::max(1.0, std::abs(expected)))
      throw std::invalid_argument("t_list must be t0 * 2^k");
  }

  BlockUnitary bu;
  bu.n_control = static_cast<int>(t_list.size());
  std::vector<Eigen::MatrixXcd> factors(t_list.size());
  for (std::size_t j = 0; j < t_list.size(); ++j) factors[j] = evolution(t_list[j]);
  const Eigen::Index d = factors.front().rows();

  const std::uint64_t n_blocks = std::uint64_t{1} << bu.n_control;
  bu.blocks.resize(n_blocks);
  for (std::uint64_t k = 0; k < n_blocks; ++k) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(d, d);
    for (std::size_t j = 0; j < t_list.size(); ++j)
      if (k & (std::uint64_t{1} << j)) u = factors[j] * u;
    bu.blocks[k] = std::move(u);
  }
  return bu;
}

double operator_norm(const Eigen::MatrixXcd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

double trace_norm(const Eigen::MatrixXcd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues().sum();
}

}  // namespace qfolio::hsim
