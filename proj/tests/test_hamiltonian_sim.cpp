#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qfolio/hamiltonian_sim.hpp"
#include "qfolio/qsim.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace qfolio;

TEST_CASE("star_eigensystem") {
  SUBCASE("(3,4) gives lambda = +/- 5") {
    Eigen::VectorXd v(2);
    v << 3, 4;
    const auto e = hsim::star_eigensystem(v, 1, 4);
    CHECK(e.lambda_plus == doctest::Approx(5.0));
    CHECK(e.lambda_minus == doctest::Approx(-5.0));
  }
  SUBCASE("single weight") {
    Eigen::VectorXd v(1);
    v << 1;
    const auto e = hsim::star_eigensystem(v, 1, 3);
    CHECK(e.lambda_plus == doctest::Approx(1.0));
    CHECK(std::abs(e.eigvec_plus(0) - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(e.eigvec_plus(2) - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(e.eigvec_minus(2) + 1.0 / std::sqrt(2.0)) <= 1e-12);
  }
  SUBCASE("random vector satisfies the eigen equations") {
    std::mt19937_64 rng(6);
    const Eigen::VectorXd v = test::random_vector(rng, 6);
    for (const int center : {1, 2}) {
      const auto h = hsim::star_matrix(v, center, 8);
      const auto e = hsim::star_eigensystem(v, center, 8);
      CHECK((h * e.eigvec_plus - e.lambda_plus * e.eigvec_plus).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((h * e.eigvec_minus - e.lambda_minus * e.eigvec_minus).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  SUBCASE("zero vector rejected") {
    CHECK_THROWS_AS(hsim::star_eigensystem(Eigen::VectorXd::Zero(3), 1, 5),
                    std::invalid_argument);
  }
}

TEST_CASE("star_exponential matches the dense exponential") {
  SUBCASE("t = 0 is the identity") {
    Eigen::VectorXd v(3);
    v << 1, -2, 0.5;
    const auto u = hsim::star_exponential(v, 1, 5, 0.0);
    CHECK((u - Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("two-level dynamics at the center site") {
    Eigen::VectorXd v(1);
    v << 1;
    const double t = 0.7;
    const auto u = hsim::star_exponential(v, 1, 3, t);
    const auto exact = hsim::exact_evolution(hsim::star_matrix(v, 1, 3), t);
    CHECK(hsim::operator_norm(u - exact) <= 1e-10);
    // cos/sin pattern on the |center> column
    CHECK(std::abs(u(0, 0) - std::cos(t)) <= 1e-12);
    CHECK(std::abs(u(2, 0) - std::complex<double>(0, -std::sin(t))) <= 1e-12);
  }
  SUBCASE("random (v, t) within 1e-8 operator norm") {
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> t_dist(0.0, 10.0);
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 1 + static_cast<int>(rng() % 7);
      Eigen::VectorXd v = test::random_vector(rng, n);
      if (v.norm() == 0) v(0) = 1;
      const int center = 1 + static_cast<int>(rng() % 2);
      const double t = t_dist(rng);
      const auto u = hsim::star_exponential(v, center, n + 2, t);
      const auto exact = hsim::exact_evolution(hsim::star_matrix(v, center, n + 2), t);
      CHECK(hsim::operator_norm(u - exact) <= 1e-8);
    }
  }
}

TEST_CASE("build_parts reassembles the KKT matrix") {
  std::mt19937_64 rng(61);
  const int n = 5;
  const Eigen::VectorXd r = test::random_vector(rng, n);
  const Eigen::VectorXd pi = test::random_vector(rng, n);
  const Eigen::MatrixXd sigma = test::random_psd(rng, n);
  const auto parts = hsim::build_parts(r, pi, sigma);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 2, n + 2);
  m.row(0).tail(n) = r.transpose();
  m.col(0).tail(n) = r;
  m.row(1).tail(n) = pi.transpose();
  m.col(1).tail(n) = pi;
  m.bottomRightCorner(n, n) = sigma;
  CHECK((parts.sum() - m).cwiseAbs().maxCoeff() <= 1e-12);

  // disjoint supports
  CHECK(parts.h_r.bottomRightCorner(n, n).cwiseAbs().maxCoeff() == 0.0);
  CHECK(parts.h_pi.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(parts.h_sigma.topLeftCorner(2, 2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trotter_evolution") {
  SUBCASE("t = 0 is the identity") {
    std::mt19937_64 rng(62);
    const auto parts = hsim::build_parts(test::random_vector(rng, 3), test::random_vector(rng, 3),
                                         test::random_psd(rng, 3));
    const auto evo = hsim::trotter_evolution(parts, 0.0, 4);
    CHECK((evo.unitary - Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("engineered commuting parts are exact in one step") {
    // R and Pi on disjoint asset supports; Sigma supported away from both.
    const int n = 6;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r(0) = 0.7;
    r(1) = -0.4;
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    pi(2) = 1.1;
    pi(3) = 0.6;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
    sigma(4, 4) = 0.9;
    sigma(5, 5) = 0.3;
    const auto parts = hsim::build_parts(r, pi, sigma);
    const auto evo = hsim::trotter_evolution(parts, 1.3, 1);
    CHECK(evo.error_bound <= 1e-10);
  }
  SUBCASE("error halves when steps double") {
    std::mt19937_64 rng(63);
    for (int rep = 0; rep < 3; ++rep) {
      const auto parts = hsim::build_parts(test::random_vector(rng, 3),
                                           test::random_vector(rng, 3), test::random_psd(rng, 3));
      const double e8 = hsim::trotter_evolution(parts, 1.0, 8).error_bound;
      const double e16 = hsim::trotter_evolution(parts, 1.0, 16).error_bound;
      const double ratio = e8 / e16;
      CHECK(ratio >= 1.4);
      CHECK(ratio <= 2.6);
    }
  }
  SUBCASE("n_steps < 1 rejected") {
    std::mt19937_64 rng(64);
    const auto parts = hsim::build_parts(test::random_vector(rng, 2), test::random_vector(rng, 2),
                                         test::random_psd(rng, 2));
    CHECK_THROWS_AS(hsim::trotter_evolution(parts, 1.0, 0), std::invalid_argument);
  }
}

TEST_CASE("density_exponentiation_step") {
  std::mt19937_64 rng(65);
  const std::complex<double> i_unit(0, 1);

  SUBCASE("dt = 0 returns sigma") {
    const auto rho = test::random_density_matrix(rng, 4);
    const auto sigma = test::random_density_matrix(rng, 4);
    const auto out = hsim::density_exponentiation_step_matrix(rho, sigma, 0.0);
    CHECK((out - sigma).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("commuting pair leaves only the O(dt^2) correction") {
    // rho and sigma diagonal in the same basis
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
    rho(0, 0) = 0.7;
    rho(1, 1) = 0.3;
    Eigen::MatrixXcd sigma = Eigen::MatrixXcd::Zero(2, 2);
    sigma(0, 0) = 0.2;
    sigma(1, 1) = 0.8;
    const double dt = 0.05;
    const auto out = hsim::density_exponentiation_step_matrix(rho, sigma, dt);
    CHECK((out - sigma).cwiseAbs().maxCoeff() <= 2.0 * dt * dt);
  }
  SUBCASE("first-order deviation scales as dt^2") {
    const auto rho = test::random_density_matrix(rng, 4);
    const auto sigma = test::random_density_matrix(rng, 4);
    std::vector<double> errs;
    for (const double dt : {0.1, 0.05, 0.025}) {
      const auto out = hsim::density_exponentiation_step_matrix(rho, sigma, dt);
      const Eigen::MatrixXcd first = sigma - i_unit * dt * (rho * sigma - sigma * rho);
      errs.push_back(hsim::trace_norm(out - first));
    }
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.3));
    CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.3));
  }
  SUBCASE("preserves trace, Hermiticity and positivity") {
    const auto rho = test::random_density_matrix(rng, 4);
    auto sigma = test::random_density_matrix(rng, 4);
    for (int k = 0; k < 5; ++k) {
      sigma = hsim::density_exponentiation_step_matrix(rho, sigma, 0.1);
      CHECK(std::abs(sigma.trace().real() - 1.0) <= 1e-9);
      CHECK((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() <= 1e-9);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sigma);
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("simulate_density_hamiltonian") {
  std::mt19937_64 rng(66);
  const qsim::RegisterLayout lay{{"s", 2}};

  SUBCASE("maximally mixed rho acts trivially") {
    const qsim::DensityMatrix rho(lay, Eigen::MatrixXcd::Identity(4, 4) / 4.0);
    const qsim::DensityMatrix sigma0(lay, test::random_density_matrix(rng, 4),
                                     qsim::DensityMatrix::Unchecked{});
    const auto out = hsim::simulate_density_hamiltonian(rho, sigma0, 1.0, 16);
    CHECK((out.matrix() - sigma0.matrix()).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("pure rho is a fixed point of its own evolution") {
    std::mt19937_64 rng2(67);
    const Eigen::VectorXcd psi = test::random_state_vector(rng2, 4);
    const Eigen::MatrixXcd proj = psi * psi.adjoint();
    const qsim::DensityMatrix rho(lay, proj, qsim::DensityMatrix::Unchecked{});
    const auto out = hsim::simulate_density_hamiltonian(rho, rho, 0.8, 8);
    CHECK((out.matrix() - proj).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("trace-distance error halves per copy doubling") {
    const auto rho_m = test::random_density_matrix(rng, 4);
    const auto sigma_m = test::random_density_matrix(rng, 4);
    const qsim::DensityMatrix rho(lay, rho_m, qsim::DensityMatrix::Unchecked{});
    const qsim::DensityMatrix sigma0(lay, sigma_m, qsim::DensityMatrix::Unchecked{});
    const double t = 1.0;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_m);
    Eigen::VectorXcd phases(4);
    for (int j = 0; j < 4; ++j) phases(j) = std::polar(1.0, -es.eigenvalues()(j) * t);
    const Eigen::MatrixXcd evo =
        es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    const Eigen::MatrixXcd exact = evo * sigma_m * evo.adjoint();

    std::vector<double> errs;
    for (const int copies : {8, 16, 32}) {
      const auto out = hsim::simulate_density_hamiltonian(rho, sigma0, t, copies);
      errs.push_back(hsim::trace_norm(out.matrix() - exact));
    }
    CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.3));
    CHECK(errs[1] / errs[2] == doctest::Approx(2.0).epsilon(0.3));
  }
}

TEST_CASE("controlled_evolution block structure") {
  std::mt19937_64 rng(68);
  const Eigen::MatrixXd h = test::random_psd(rng, 4) - 0.4 * Eigen::MatrixXd::Identity(4, 4);
  const auto evolution = [&](double t) { return hsim::exact_evolution(h, t); };
  const double t0 = 0.3;

  SUBCASE("t_list must be powers of two times t0") {
    CHECK_THROWS_AS(hsim::controlled_evolution(evolution, {t0, 3 * t0}), std::invalid_argument);
  }
  SUBCASE("blocks compose the per-qubit factors") {
    const auto bu = hsim::controlled_evolution(evolution, {t0, 2 * t0, 4 * t0});
    REQUIRE(bu.blocks.size() == 8);
    CHECK((bu.blocks[0] - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
    for (const std::uint64_t k : {1ULL, 3ULL, 5ULL, 7ULL}) {
      const auto expect = hsim::exact_evolution(h, t0 * static_cast<double>(k));
      CHECK(hsim::operator_norm(bu.blocks[k] - expect) <= 1e-10);
    }
  }
  SUBCASE("diagonal generator gives closed-form phases") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 0.5;
    d(1, 1) = -0.25;
    const auto bu = hsim::controlled_evolution(
        [&](double t) { return hsim::exact_evolution(d, t); }, {t0, 2 * t0});
    for (std::uint64_t k = 0; k < 4; ++k)
      for (int j = 0; j < 2; ++j) {
        const std::complex<double> want = std::polar(1.0, -d(j, j) * t0 * static_cast<double>(k));
        CHECK(std::abs(bu.blocks[k](j, j) - want) <= 1e-12);
      }
  }
}
