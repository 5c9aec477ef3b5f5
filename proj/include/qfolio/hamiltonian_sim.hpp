#pragma once

#include "qfolio/qsim.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace qfolio::hsim {

/// Star-graph Hamiltonian: dim x dim matrix whose only nonzero entries are
/// row/column `center` (1-based, 1 or 2) carrying v over slots 3..N+2.
Eigen::MatrixXd star_matrix(const Eigen::VectorXd& v, int center, int dim);

struct StarEigensystem {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  Eigen::VectorXd eigvec_plus;
  Eigen::VectorXd eigvec_minus;
};

/// The two nonzero eigenvalues ±sqrt(sum v^2) and their eigenvectors
/// (|center⟩ + (1/λ±) Σ v_s |s+2⟩)/sqrt(2); the rest of the spectrum is zero.
StarEigensystem star_eigensystem(const Eigen::VectorXd& v, int center, int dim);

/// e^{-i H_star t} assembled from the eigenbasis recipe: a Hadamard-type mixing
/// between |center⟩ and |3⟩, the rotation-cascade map |3⟩ -> |v̂⟩, phases on the
/// two eigenvectors, and the inverse transforms.
Eigen::MatrixXcd star_exponential(const Eigen::VectorXd& v, int center, int dim, double t);

/// The three KKT Hamiltonian parts: H_Sigma (asset block), H_R (star at 1),
/// H_Pi (star at 2), summing exactly to M.
struct HamiltonianParts {
  Eigen::MatrixXd h_sigma;
  Eigen::MatrixXd h_r;
  Eigen::MatrixXd h_pi;
  double trotter_dt = 0.0;
  int n_steps = 0;

  Eigen::MatrixXd sum() const { return h_sigma + h_r + h_pi; }
  int dim() const { return static_cast<int>(h_sigma.rows()); }
};

HamiltonianParts build_parts(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                             const Eigen::MatrixXd& sigma);

/// Exact e^{-i h t} via self-adjoint eigendecomposition.
Eigen::MatrixXcd exact_evolution(const Eigen::MatrixXd& h, double t);

enum class EvolutionMethod { exact, trotter, density_exp };

struct SimulatedEvolution {
  Eigen::MatrixXcd unitary;
  double t_total = 0.0;
  EvolutionMethod method = EvolutionMethod::exact;
  double error_bound = 0.0;  // operator-norm distance to the exact evolution
  int n_steps = 0;
};

/// First-order Lie product: per step e^{-iH_Σ Δt} e^{-iH_R Δt} e^{-iH_Π Δt}
/// with Δt = t / n_steps. The star factors use the recipe construction.
SimulatedEvolution trotter_evolution(const HamiltonianParts& parts, double t, int n_steps);

/// One partial-swap step: tr_1{ e^{-iS dt} (rho ⊗ sigma) e^{+iS dt} }
/// = sigma - i dt [rho, sigma] + O(dt^2). Exact on the doubled space
/// (S is an involution, so e^{-iS dt} = cos(dt) I - i sin(dt) S).
Eigen::MatrixXcd density_exponentiation_step_matrix(const Eigen::MatrixXcd& rho,
                                                    const Eigen::MatrixXcd& sigma, double dt);
qsim::DensityMatrix density_exponentiation_step(const qsim::DensityMatrix& rho,
                                                const qsim::DensityMatrix& sigma, double dt);

/// n_copies repetitions with dt = t / n_copies, approximating
/// e^{-i rho t} sigma0 e^{+i rho t} with trace-distance error O(t^2 / n_copies).
qsim::DensityMatrix simulate_density_hamiltonian(const qsim::DensityMatrix& rho,
                                                 const qsim::DensityMatrix& sigma0, double t,
                                                 int n_copies);

/// Block-diagonal controlled evolution sum_k |k⟩⟨k| ⊗ U(t_k), composed from
/// the per-control-qubit factors U(t_list[j]) with t_list[j] = t0 * 2^j.
struct BlockUnitary {
  std::vector<Eigen::MatrixXcd> blocks;  // size 2^n_control
  int n_control = 0;
  Eigen::MatrixXcd dense() const;  // for small sizes / tests
};

BlockUnitary controlled_evolution(const std::function<Eigen::MatrixXcd(double)>& evolution,
                                  const std::vector<double>& t_list);

/// Operator norm (largest singular value) and trace norm helpers.
double operator_norm(const Eigen::MatrixXcd& a);
double trace_norm(const Eigen::MatrixXcd& a);

}  // namespace qfolio::hsim
