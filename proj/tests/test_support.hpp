#pragma once

#include <Eigen/Dense>

#include <complex>
#include <random>

namespace qfolio::test {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int n, double ridge = 0.0) {
  const Eigen::MatrixXd a = random_matrix(rng, n, n);
  return a * a.transpose() / n + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXcd random_state_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = std::complex<double>(gauss(rng), gauss(rng));
  return v / v.norm();
}

inline Eigen::MatrixXcd random_unitary(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = std::complex<double>(gauss(rng), gauss(rng));
  const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  // fix the phase convention so Q is reproducible across runs
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (std::abs(r(j, j)) > 0) q.col(j) *= r(j, j) / std::abs(r(j, j));
  return q;
}

inline Eigen::MatrixXcd random_density_matrix(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = std::complex<double>(gauss(rng), gauss(rng));
  Eigen::MatrixXcd rho = g * g.adjoint();
  return rho / rho.trace().real();
}

}  // namespace qfolio::test
