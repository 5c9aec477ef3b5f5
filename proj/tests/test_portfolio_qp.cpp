#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qfolio/portfolio_qp.hpp"
#include "test_support.hpp"

#include <random>

using namespace qfolio;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("build_kkt assembles the block structure") {
  const auto k = qp::build_kkt(vec2(1, 1), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0,
                               qp::BudgetMode::prices);
  CHECK(k.m_matrix.rows() == 4);
  CHECK(k.m_matrix.topLeftCorner(2, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.m_matrix(0, 2) == 1.0);
  CHECK(k.m_matrix(2, 0) == 1.0);
  CHECK(k.m_matrix(2, 2) == 1.0);
  CHECK(k.rhs(0) == 1.0);
  CHECK(k.rhs(1) == 1.0);
  CHECK(k.rhs.tail(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(k.m_hat.trace() == doctest::Approx(1.0));

  SUBCASE("unit budget mode replaces pi with ones") {
    const auto ku = qp::build_kkt(vec2(1, 1), vec2(7, 9), Eigen::MatrixXd::Identity(2, 2), 1.0,
                                  1.0, qp::BudgetMode::unit);
    CHECK(ku.m_matrix(1, 2) == 1.0);
    CHECK(ku.m_matrix(1, 3) == 1.0);
  }

  SUBCASE("asymmetric sigma rejected") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(0, 1) = 1e-3;
    CHECK_THROWS_AS(qp::build_kkt(vec2(1, 1), vec2(1, 1), bad, 1, 1, qp::BudgetMode::prices),
                    std::invalid_argument);
  }
  SUBCASE("dimension mismatch rejected") {
    CHECK_THROWS_AS(qp::build_kkt(vec2(1, 1), Eigen::VectorXd::Ones(3),
                                  Eigen::MatrixXd::Identity(2, 2), 1, 1, qp::BudgetMode::prices),
                    std::invalid_argument);
  }
  SUBCASE("zero-trace sigma rejected") {
    CHECK_THROWS_AS(qp::build_kkt(vec2(1, 1), vec2(1, 1), Eigen::MatrixXd::Zero(2, 2), 1, 1,
                                  qp::BudgetMode::prices),
                    std::invalid_argument);
  }
}

TEST_CASE("solve_exact on the symmetric toy") {
  const auto k = qp::build_kkt(vec2(1, 1), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0,
                               qp::BudgetMode::prices);
  const auto sol = qp::solve_exact(k);
  CHECK(sol.weights(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.weights(1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.risk == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("solve_exact weights risk inversely to variance") {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 1.0;
  sigma(1, 1) = 4.0;
  const auto k = qp::build_kkt(vec2(1, 1), vec2(1, 1), sigma, 1.0, 1.0, qp::BudgetMode::prices);
  const auto sol = qp::solve_exact(k);
  CHECK(sol.weights(0) == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(sol.weights(1) == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(sol.achieved_return == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.achieved_budget == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solve_exact rejects contradictory constraints") {
  const auto k = qp::build_kkt(vec2(1, 1), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2), 2.0, 1.0,
                               qp::BudgetMode::prices);
  CHECK_THROWS_WITH_AS(qp::solve_exact(k), doctest::Contains("infeasible target"),
                       std::runtime_error);
}

TEST_CASE("pseudo_inverse_kappa filters small eigenvalues") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 0.1;
  Eigen::VectorXd b = vec2(1, 1);

  SUBCASE("kappa = 2 excludes the 0.1 eigenvalue") {
    const auto [x, eps] = qp::pseudo_inverse_kappa(m, b, 2.0);
    CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x(1) == doctest::Approx(0.0));
    CHECK(eps == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("kappa large enough matches the full inverse") {
    const auto [x, eps] = qp::pseudo_inverse_kappa(m, b, 100.0);
    CHECK(x(1) == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(eps <= 1e-10);
  }
  SUBCASE("kappa <= 0 rejected") {
    CHECK_THROWS_AS(qp::pseudo_inverse_kappa(m, b, 0.0), std::invalid_argument);
  }
  SUBCASE("epsilon_kappa non-increasing over a kappa sweep") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd sym = test::random_psd(rng, 6) -
                                0.3 * Eigen::MatrixXd::Identity(6, 6);
    const Eigen::VectorXd rhs = test::random_vector(rng, 6);
    double prev = 1e300;
    for (double kappa = 1.0; kappa <= 4096.0; kappa *= 2.0) {
      const auto [x, eps] = qp::pseudo_inverse_kappa(sym, rhs, kappa);
      CHECK(eps <= prev + 1e-12);
      prev = eps;
    }
  }
}

TEST_CASE("frontier sweeps the grid and omits infeasible points") {
  SUBCASE("closed-form two-asset frontier") {
    // Sigma = I, R = (1,2), budget (1,1): w = (2 xi - mu, mu - xi),
    // risk(mu) = (2 xi - mu)^2 + (mu - xi)^2, minimized at mu = 3 xi / 2.
    const double xi = 1.0;
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(1.0 + 0.05 * i);
    const auto curve = qp::frontier(vec2(1, 2), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2), grid,
                                    xi, qp::BudgetMode::prices);
    REQUIRE(curve.points.size() == grid.size());
    double best_mu = 0, best_risk = 1e300;
    for (const auto& p : curve.points) {
      const double expect = (2 * xi - p.mu) * (2 * xi - p.mu) + (p.mu - xi) * (p.mu - xi);
      CHECK(p.min_risk == doctest::Approx(expect).epsilon(1e-9));
      if (p.min_risk < best_risk) {
        best_risk = p.min_risk;
        best_mu = p.mu;
      }
    }
    CHECK(best_mu == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("single point grid") {
    const auto curve = qp::frontier(vec2(1, 2), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2),
                                    {1.25}, 1.0, qp::BudgetMode::prices);
    CHECK(curve.points.size() == 1);
  }
  SUBCASE("duplicate grid values are preserved") {
    const auto curve = qp::frontier(vec2(1, 2), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2),
                                    {1.25, 1.25}, 1.0, qp::BudgetMode::prices);
    CHECK(curve.points.size() == 2);
    CHECK(curve.points[0].mu == curve.points[1].mu);
  }
  SUBCASE("infeasible points become warnings") {
    const auto curve = qp::frontier(vec2(1, 1), vec2(1, 1), Eigen::MatrixXd::Identity(2, 2),
                                    {1.0, 2.0}, 1.0, qp::BudgetMode::prices);
    CHECK(curve.points.size() == 1);
    CHECK(curve.warnings.size() == 1);
  }
}

TEST_CASE("portfolio_risk") {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 2.0;
  sigma(1, 1) = 3.0;
  CHECK(qp::portfolio_risk(vec2(1, 0), sigma) == doctest::Approx(2.0));
  CHECK(qp::portfolio_risk(vec2(0, 0), sigma) == doctest::Approx(0.0));
  CHECK_THROWS_AS(qp::portfolio_risk(Eigen::VectorXd::Ones(3), sigma), std::invalid_argument);

  SUBCASE("matches the double-loop oracle") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd s = test::random_psd(rng, 5);
    const Eigen::VectorXd w = test::random_vector(rng, 5);
    double direct = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) direct += w(i) * s(i, j) * w(j);
    CHECK(qp::portfolio_risk(w, s) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("solve_exact properties on random instances") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.5, 2.0);

  for (const int n : {2, 4, 8, 16}) {
    const Eigen::MatrixXd sigma = test::random_psd(rng, n, 0.4);
    const Eigen::VectorXd r = test::random_vector(rng, n);
    const Eigen::VectorXd pi =
        test::random_vector(rng, n).cwiseAbs() + Eigen::VectorXd::Constant(n, 0.1);
    const double mu = unif(rng), xi = unif(rng);
    const auto k = qp::build_kkt(r, pi, sigma, mu, xi, qp::BudgetMode::prices);
    const auto sol = qp::solve_exact(k);

    Eigen::VectorXd x(n + 2);
    x << sol.eta, sol.theta, sol.weights;
    CHECK((k.m_matrix * x - k.rhs).norm() <= 1e-9 * k.rhs.norm());

    // optimality against feasible perturbations
    Eigen::MatrixXd constraints(2, n);
    constraints.row(0) = r.transpose();
    constraints.row(1) = pi.transpose();
    const Eigen::MatrixXd null_basis = Eigen::FullPivLU<Eigen::MatrixXd>(constraints).kernel();
    for (int p = 0; p < 100 && null_basis.cols() > 0; ++p) {
      Eigen::VectorXd delta =
          null_basis * test::random_vector(rng, static_cast<int>(null_basis.cols()));
      if (delta.norm() == 0) continue;
      delta *= 0.05 * std::max(1.0, sol.weights.norm()) / delta.norm();
      CHECK(qp::portfolio_risk(sol.weights + delta, sigma) >= sol.risk - 1e-9);
    }

    // scaling linearity: (c mu, c xi) scales w by c
    const auto scaled = qp::solve_exact(qp::build_kkt(r, pi, sigma, 3.0 * mu, 3.0 * xi,
                                                      qp::BudgetMode::prices));
    CHECK((scaled.weights - 3.0 * sol.weights).cwiseAbs().maxCoeff() <=
          1e-8 * sol.weights.cwiseAbs().maxCoeff());
  }
}
