#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qfolio/market_data.hpp"
#include "qfolio/qsim.hpp"
#include "qfolio/state_prep.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace qfolio;
using qsim::QuantumState;
using qsim::RegisterLayout;

namespace {

market::ReturnsPanel panel_from(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  const int t = static_cast<int>(rows.begin()->size());
  Eigen::MatrixXd y(n, t);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (const double v : row) y(i, j++) = v;
    ++i;
  }
  return market::ReturnsPanel::from_returns(y);
}

}  // namespace

TEST_CASE("qram oracle quantization and patterns") {
  const auto o = prep::QramOracle::fixed_point({0.5, -0.25, 0.3}, 4);
  CHECK(o.value(0) == doctest::Approx(0.5));
  CHECK(o.value(1) == doctest::Approx(-0.25));
  CHECK(std::abs(o.value(2) - 0.3) <= std::pow(2.0, -5));  // half-ulp rounding
  CHECK(o.value(99) == 0.0);
  CHECK(o.decode(o.pattern(1)) == doctest::Approx(o.value(1)));

  const auto exact = prep::QramOracle::exact({0.123456789});
  CHECK(exact.value(0) == 0.123456789);
  CHECK_THROWS_AS(exact.pattern(0), std::invalid_argument);
}

TEST_CASE("oracle_query loads and uncomputes") {
  const auto o = prep::QramOracle::fixed_point({0.0, 0.25, -0.5, 0.75}, 2);
  const int m = o.m_bits();
  RegisterLayout lay{{"i", 2}, {"d", m}};

  SUBCASE("single basis index") {
    auto s = qsim::allocate_state(lay);
    Eigen::MatrixXcd x(4, 4);  // map |0> -> |3> on the index register
    x.setZero();
    x(3, 0) = x(0, 3) = x(1, 1) = x(2, 2) = 1.0;
    s = qsim::apply_unitary(s, x, {"i"});
    const auto q = prep::oracle_query(o, s, {"i"}, "d");
    const std::uint64_t expect = (3ULL << m) | o.pattern(3);
    CHECK(std::abs(q.amplitudes()(expect) - 1.0) <= 1e-12);
  }
  SUBCASE("superposition branches stay correlated, and uncompute restores") {
    auto s = qsim::hadamard_all(qsim::allocate_state(lay), "i");
    const auto q = prep::oracle_query(o, s, {"i"}, "d");
    for (std::uint64_t i = 0; i < 4; ++i) {
      const std::uint64_t idx = (i << m) | o.pattern(i);
      CHECK(std::abs(q.amplitudes()(idx) - 0.5) <= 1e-12);
    }
    const auto back = prep::oracle_query_inverse(o, q, {"i"}, "d");
    CHECK((back.amplitudes() - s.amplitudes()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("occupied data register rejected") {
    auto s = qsim::allocate_state(lay);
    Eigen::MatrixXcd x(2, 2);
    x << 0, 1, 1, 0;
    std::vector<std::string> d{"d"};
    // flip the lowest data qubit
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Identity(1 << m, 1 << m);
    full.setZero();
    for (std::uint64_t v = 0; v < (1ULL << m); ++v) full(v ^ 1, v) = 1.0;
    s = qsim::apply_unitary(s, full, std::span<const std::string>(d));
    CHECK_THROWS_WITH_AS(prep::oracle_query(o, s, {"i"}, "d"),
                         doctest::Contains("data register occupied"), std::invalid_argument);
  }
}

TEST_CASE("prepare_chi amplitude encoding") {
  SUBCASE("single entry with delta y = 1") {
    const auto panel = panel_from({{0.5, 0.5}});
    // constant row: still fine for chi (not mean-adjusted)
    prep::PrepOptions opts;
    opts.delta = 2.0;
    const auto chi = prep::prepare_chi(panel, opts);
    CHECK(chi.success_probability == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("uniform panel gives the uniform state") {
    const auto panel = panel_from({{0.1, 0.1}, {0.1, 0.1}});
    const auto chi = prep::prepare_chi(panel);
    for (std::uint64_t i = 0; i < 4; ++i)
      CHECK(std::abs(chi.state.amplitudes()(i) - 0.5) <= 1e-12);
  }
  SUBCASE("random panel matches y/|y| with the analytic probability") {
    std::mt19937_64 rng(77);
    const auto y = test::random_matrix(rng, 2, 4, 0.1);
    const auto panel = market::ReturnsPanel::from_returns(y);
    const auto chi = prep::prepare_chi(panel);

    // P_chi = delta^2 sum y^2 / (T N) with padded register sizes
    const double expect_p = chi.delta_used * chi.delta_used * panel.norm_y * panel.norm_y /
                            (4.0 * 2.0);
    CHECK(chi.success_probability == doctest::Approx(expect_p).epsilon(1e-12));

    // amplitudes: layout {t, s}, index = t * 2 + s
    for (int t = 0; t < 4; ++t)
      for (int s = 0; s < 2; ++s)
        CHECK(std::abs(chi.state.amplitudes()(2 * t + s).real() - y(s, t) / panel.norm_y) <=
              1e-10);
  }
  SUBCASE("all-zero panel is a null branch") {
    const auto panel = panel_from({{0.0, 0.0}});
    CHECK_THROWS_WITH_AS(prep::prepare_chi(panel), doctest::Contains("null branch"),
                         std::runtime_error);
  }
  SUBCASE("explicit data register path agrees with the collapsed path") {
    std::mt19937_64 rng(78);
    const auto panel = market::ReturnsPanel::from_returns(test::random_matrix(rng, 2, 2, 0.1));
    prep::PrepOptions collapsed;
    collapsed.frac_bits = 5;
    prep::PrepOptions literal = collapsed;
    literal.explicit_data_register = true;
    const auto a = prep::prepare_chi(panel, collapsed);
    const auto b = prep::prepare_chi(panel, literal);
    CHECK(a.success_probability == doctest::Approx(b.success_probability).epsilon(1e-12));
    CHECK((a.state.amplitudes() - b.state.amplitudes()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("prepare_R_state") {
  SUBCASE("T = 1 gives the asset marginal with certainty") {
    Eigen::MatrixXd y(2, 1);
    y << 0.3, 0.4;
    // from_returns requires T >= 2 for Sigma; build the T=1 panel by hand
    market::ReturnsPanel panel;
    panel.returns = y;
    panel.expected_return = y.col(0);
    panel.covariance = Eigen::MatrixXd::Zero(2, 2);
    panel.norm_y = y.norm();
    panel.norm_y_prime = y.norm();
    panel.norm_y_tilde = 0.0;
    const auto chi = prep::prepare_chi(panel);
    const auto r = prep::prepare_R_state(chi);
    CHECK(r.success_probability == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.state.amplitudes()(0).real() - 0.6) <= 1e-12);
    CHECK(std::abs(r.state.amplitudes()(1).real() - 0.8) <= 1e-12);
  }
  SUBCASE("time-independent returns succeed with certainty") {
    const auto panel = panel_from({{0.2, 0.2}, {-0.1, -0.1}});
    const auto chi = prep::prepare_chi(panel);
    const auto r = prep::prepare_R_state(chi);
    CHECK(r.success_probability == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("random panel matches the row sums and P_R") {
    std::mt19937_64 rng(99);
    const auto y = test::random_matrix(rng, 4, 4, 0.1);
    const auto panel = market::ReturnsPanel::from_returns(y);
    const auto chi = prep::prepare_chi(panel);
    const auto r = prep::prepare_R_state(chi);

    const Eigen::VectorXd sums = y.rowwise().sum();
    const double expect_p =
        sums.squaredNorm() / (4.0 * panel.norm_y * panel.norm_y);
    CHECK(r.success_probability == doctest::Approx(expect_p).epsilon(1e-10));
    const Eigen::VectorXd target = sums / sums.norm();
    for (int s = 0; s < 4; ++s) {
      // sign convention: compare up to the global sign of the branch
      CHECK(std::abs(std::abs(r.state.amplitudes()(s).real()) - std::abs(target(s))) <= 1e-10);
    }
    // also pin relative signs
    for (int s = 1; s < 4; ++s) {
      const double got = r.state.amplitudes()(s).real() * r.state.amplitudes()(0).real();
      CHECK(got == doctest::Approx(target(s) * target(0)).epsilon(1e-8));
    }
  }
}

TEST_CASE("prepare_chi_tilde mean-adjusted encoding") {
  SUBCASE("constant rows are a null branch") {
    const auto panel = panel_from({{0.3, 0.3}, {0.1, 0.1}});
    CHECK_THROWS_WITH_AS(prep::prepare_chi_tilde(panel), doctest::Contains("null branch"),
                         std::runtime_error);
  }
  SUBCASE("antisymmetric single asset gives (|0> - |1>)/sqrt(2)") {
    const auto panel = panel_from({{0.4, -0.4}});
    const auto out = prep::prepare_chi_tilde(panel);
    const auto& amp = out.state.amplitudes();
    REQUIRE(amp.size() == 2);
    const double sign = amp(0).real() > 0 ? 1.0 : -1.0;
    CHECK(std::abs(sign * amp(0).real() - 1.0 / std::numbers::sqrt2) <= 1e-10);
    CHECK(std::abs(sign * amp(1).real() + 1.0 / std::numbers::sqrt2) <= 1e-10);
  }
  SUBCASE("random panel: amplitudes, probability, and the trace identity") {
    std::mt19937_64 rng(123);
    const auto y = test::random_matrix(rng, 2, 4, 0.1);
    const auto panel = market::ReturnsPanel::from_returns(y);
    const auto out = prep::prepare_chi_tilde(panel);

    const double delta = out.delta_used;
    const double tr_sigma = panel.covariance.trace();
    const double expect_p = delta * delta * 3.0 * tr_sigma / (4.0 * 4.0 * 2.0);
    CHECK(out.success_probability == doctest::Approx(expect_p).epsilon(1e-10));
    CHECK(out.success_probability ==
          doctest::Approx(delta * delta * panel.norm_y_tilde * panel.norm_y_tilde / (4.0 * 4.0 * 2.0))
              .epsilon(1e-10));

    const Eigen::VectorXd mean = y.rowwise().mean();
    for (int t = 0; t < 4; ++t)
      for (int s = 0; s < 2; ++s) {
        const double want = (y(s, t) - mean(s)) / panel.norm_y_tilde;
        CHECK(std::abs(out.state.amplitudes()(2 * t + s).real() - want) <= 1e-10);
      }
  }
  SUBCASE("literal circuit with data register agrees with collapsed form") {
    std::mt19937_64 rng(124);
    const auto panel = market::ReturnsPanel::from_returns(test::random_matrix(rng, 2, 2, 0.1));
    prep::PrepOptions collapsed;
    collapsed.frac_bits = 5;
    prep::PrepOptions literal = collapsed;
    literal.explicit_data_register = true;
    const auto a = prep::prepare_chi_tilde(panel, collapsed);
    const auto b = prep::prepare_chi_tilde(panel, literal);
    CHECK(a.success_probability == doctest::Approx(b.success_probability).epsilon(1e-11));
    CHECK((a.state.amplitudes() - b.state.amplitudes()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("covariance_density reproduces Sigma / tr Sigma") {
  SUBCASE("single asset gives the scalar 1") {
    const auto panel = panel_from({{0.2, -0.2, 0.1, -0.1}});
    const auto rho = prep::covariance_density(prep::prepare_chi_tilde(panel));
    REQUIRE(rho.matrix().rows() == 1);
    CHECK(std::abs(rho.matrix()(0, 0).real() - 1.0) <= 1e-10);
  }
  SUBCASE("perfectly correlated assets give a rank-1 density") {
    const auto panel = panel_from({{0.2, -0.2, 0.1, -0.1}, {0.4, -0.4, 0.2, -0.2}});
    const auto rho = prep::covariance_density(prep::prepare_chi_tilde(panel));
    CHECK(rho.purity() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("random panel: rho * trSigma = Sigma elementwise") {
    std::mt19937_64 rng(55);
    const auto y = test::random_matrix(rng, 3, 8, 0.1);
    const auto panel = market::ReturnsPanel::from_returns(y);
    const auto rho = prep::covariance_density(prep::prepare_chi_tilde(panel));
    const double tr_sigma = panel.covariance.trace();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(rho.matrix()(i, j).real() * tr_sigma - panel.covariance(i, j)) <= 1e-9);
    // padded slots carry nothing
    CHECK(std::abs(rho.matrix()(3, 3)) <= 1e-12);
  }
}

TEST_CASE("estimate_trace_sigma inverts the probability formula") {
  std::mt19937_64 rng(66);
  const auto y = test::random_matrix(rng, 2, 4, 0.1);
  const auto panel = market::ReturnsPanel::from_returns(y);
  const auto out = prep::prepare_chi_tilde(panel);
  const double est =
      prep::estimate_trace_sigma(out.success_probability, out.delta_used, 4, 2);
  CHECK(est == doctest::Approx(panel.covariance.trace()).epsilon(1e-10));

  CHECK(prep::estimate_trace_sigma(0.0, 1.0, 4, 2) == 0.0);
  CHECK_THROWS_AS(prep::estimate_trace_sigma(0.1, 1.0, 1, 2), std::invalid_argument);

  SUBCASE("shot-based estimate lands within binomial error") {
    std::mt19937_64 shot_rng(4242);
    const double p = out.success_probability;
    const std::uint64_t trials = 100000;
    std::binomial_distribution<std::uint64_t> binom(trials, p);
    const double p_hat = static_cast<double>(binom(shot_rng)) / trials;
    const double est_hat = prep::estimate_trace_sigma(p_hat, out.delta_used, 4, 2);
    const double sigma_p = std::sqrt(p * (1 - p) / trials);
    const double sigma_est = prep::estimate_trace_sigma(sigma_p, out.delta_used, 4, 2);
    CHECK(std::abs(est_hat - panel.covariance.trace()) <= 4.0 * sigma_est);
  }
}

TEST_CASE("kp tree build, update and prepare") {
  SUBCASE("(3,4) example") {
    Eigen::VectorXd v(2);
    v << 3, 4;
    const auto tree = prep::kp_build(v);
    CHECK(tree.root() == doctest::Approx(25.0));
    CHECK(tree.levels[1][0] == doctest::Approx(9.0));
    CHECK(tree.levels[1][1] == doctest::Approx(16.0));
    CHECK(tree.leaf_signs[0] == 1.0);
    CHECK(tree.leaf_signs[1] == 1.0);
  }
  SUBCASE("signs recorded, zeros get +1") {
    Eigen::VectorXd v(4);
    v << 1, -1, 0, 0;
    const auto tree = prep::kp_build(v);
    CHECK(tree.root() == doctest::Approx(2.0));
    CHECK(tree.leaf_signs[0] == 1.0);
    CHECK(tree.leaf_signs[1] == -1.0);
    CHECK(tree.leaf_signs[2] == 1.0);
    CHECK(tree.leaf_signs[3] == 1.0);
  }
  SUBCASE("parent equals sum of children on random vectors") {
    std::mt19937_64 rng(10);
    const auto v = test::random_vector(rng, 8);
    const auto tree = prep::kp_build(v);
    for (int level = 0; level < tree.depth; ++level)
      for (std::size_t j = 0; j < tree.levels[level].size(); ++j)
        CHECK(tree.levels[level][j] ==
              doctest::Approx(tree.levels[level + 1][2 * j] + tree.levels[level + 1][2 * j + 1])
                  .epsilon(1e-12));
  }
  SUBCASE("update examples") {
    Eigen::VectorXd v(2);
    v << 3, 4;
    auto tree = prep::kp_build(v);
    prep::kp_update(tree, 0, 3.0);  // unchanged value
    CHECK(tree.root() == doctest::Approx(25.0));
    prep::kp_update(tree, 0, 0.0);
    CHECK(tree.root() == doctest::Approx(16.0));
    CHECK_THROWS_AS(prep::kp_update(tree, 2, 1.0), std::invalid_argument);
  }
  SUBCASE("update equals rebuild on a random length-16 tree") {
    std::mt19937_64 rng(20);
    Eigen::VectorXd v = test::random_vector(rng, 16);
    auto tree = prep::kp_build(v);
    prep::kp_update(tree, 5, -2.5);
    v(5) = -2.5;
    const auto rebuilt = prep::kp_build(v);
    for (std::size_t level = 0; level < rebuilt.levels.size(); ++level)
      for (std::size_t j = 0; j < rebuilt.levels[level].size(); ++j)
        CHECK(tree.levels[level][j] == doctest::Approx(rebuilt.levels[level][j]).epsilon(1e-12));
  }
  SUBCASE("kp_prepare simple cases") {
    Eigen::VectorXd v(2);
    v << 1, 0;
    CHECK(std::abs(prep::kp_prepare(prep::kp_build(v)).amplitudes()(0) - 1.0) <= 1e-12);
    v << 1, -1;
    const auto s = prep::kp_prepare(prep::kp_build(v));
    CHECK(std::abs(s.amplitudes()(0).real() - 1.0 / std::numbers::sqrt2) <= 1e-12);
    CHECK(std::abs(s.amplitudes()(1).real() + 1.0 / std::numbers::sqrt2) <= 1e-12);
  }
  SUBCASE("kp_prepare equals v/||v|| on random signed vectors") {
    std::mt19937_64 rng(30);
    for (const int n : {3, 5, 8, 13}) {
      const Eigen::VectorXd v = test::random_vector(rng, n);
      const auto s = prep::kp_prepare(prep::kp_build(v));
      for (std::uint64_t i = 0; i < s.layout().dim(); ++i) {
        const double want = i < static_cast<std::uint64_t>(n) ? v(i) / v.norm() : 0.0;
        CHECK(std::abs(s.amplitudes()(i).real() - want) <= 1e-10);
        CHECK(std::abs(s.amplitudes()(i).imag()) <= 1e-12);
      }
    }
  }
  SUBCASE("zero vector rejected") {
    CHECK_THROWS_AS(prep::kp_build(Eigen::VectorXd::Zero(4)), std::invalid_argument);
  }
}

TEST_CASE("m-bit quantization error bound on prepare_chi") {
  std::mt19937_64 rng(40);
  const auto y = test::random_matrix(rng, 2, 4, 0.3);
  const auto panel = market::ReturnsPanel::from_returns(y);
  const auto exact = prep::prepare_chi(panel);

  for (const int frac_bits : {8, 16, 32}) {
    prep::PrepOptions opts;
    opts.frac_bits = frac_bits;
    opts.delta = exact.delta_used * 0.5;  // keep |delta q(y)| <= 1 after rounding
    const auto quant = prep::prepare_chi(panel, opts);
    const double err = (quant.state.amplitudes() - exact.state.amplitudes()).norm();
    const double bound = std::pow(2.0, 1 - frac_bits) * std::sqrt(4.0 * 2.0) / panel.norm_y;
    CHECK(err <= bound);
  }
}
