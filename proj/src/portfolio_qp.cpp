#include "qfolio/portfolio_qp.hpp"

#include <cmath>
#include <stdexcept>

namespace qfolio::qp {

namespace {
constexpr double kZeroEigRel = 1e-12;   // pseudo-inverse cutoff relative to max|lambda|
constexpr double kFeasRel = 1e-8;       // rhs-outside-range tolerance
}  // namespace

KKTSystem build_kkt(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                    const Eigen::MatrixXd& sigma, double mu, double xi,
                    BudgetMode budget_mode) {
  const int n = static_cast<int>(r.size());
  if (pi.size() != n) throw std::invalid_argument("r and pi must have equal length");
  if (sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("sigma must be N x N with N = r.size()");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("sigma asymmetric beyond 1e-10");
  if (!(sigma.trace() > 0.0)) throw std::invalid_argument("sigma must have positive trace");

  const Eigen::VectorXd budget =
      budget_mode == BudgetMode::unit ? Eigen::VectorXd::Ones(n).eval() : pi;

  KKTSystem k;
  k.m_matrix = Eigen::MatrixXd::Zero(n + 2, n + 2);
  k.m_matrix.row(0).tail(n) = r.transpose();
  k.m_matrix.row(1).tail(n) = budget.transpose();
  k.m_matrix.col(0).tail(n) = r;
  k.m_matrix.col(1).tail(n) = budget;
  k.m_matrix.bottomRightCorner(n, n) = 0.5 * (sigma + sigma.transpose());
  k.m_hat = k.m_matrix / k.m_matrix.trace();
  k.rhs = Eigen::VectorXd::Zero(n + 2);
  k.rhs(0) = mu;
  k.rhs(1) = xi;
  k.mu = mu;
  k.xi = xi;
  return k;
}

PortfolioSolution solve_exact(const KKTSystem& k) {
  const int n = k.n_assets();
  const Eigen::MatrixXd& m = k.m_matrix;
  const Eigen::VectorXd& b = k.rhs;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::MatrixXd& u = es.eigenvectors();

  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double cutoff = kZeroEigRel * lam_max;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.rows());
  for (int j = 0; j < lam.size(); ++j) {
    if (std::abs(lam(j)) <= cutoff) continue;
    const double beta = u.col(j).dot(b);
    x += (beta / lam(j)) * u.col(j);
  }

  const double resid = (m * x - b).norm();
  if (resid > kFeasRel * std::max(1.0, b.norm()))
    throw std::runtime_error("infeasible target");

  PortfolioSolution sol;
  sol.eta = x(0);
  sol.theta = x(1);
  sol.weights = x.tail(n);
  sol.achieved_return = k.return_vector().dot(sol.weights);
  sol.achieved_budget = k.budget_vector().dot(sol.weights);
  sol.risk = portfolio_risk(sol.weights, k.sigma());
  return sol;
}

std::pair<Eigen::VectorXd, double> pseudo_inverse_kappa(const Eigen::MatrixXd& m_hat,
                                                        const Eigen::VectorXd& b,
                                                        double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (m_hat.rows() != m_hat.cols() || m_hat.rows() != b.size())
    throw std::invalid_argument("dimension mismatch");
  if ((m_hat - m_hat.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("m_hat asymmetric beyond 1e-10");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_hat);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const Eigen::MatrixXd& u = es.eigenvectors();
  const double cutoff = kZeroEigRel * lam.cwiseAbs().maxCoeff();
  const double floor = 1.0 / kappa;

  Eigen::VectorXd x_kappa = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd x_full = Eigen::VectorXd::Zero(b.size());
  for (int j = 0; j < lam.size(); ++j) {
    const double l = lam(j);
    if (std::abs(l) <= cutoff) continue;
    const double beta = u.col(j).dot(b);
    x_full += (beta / l) * u.col(j);
    if (std::abs(l) >= floor) x_kappa += (beta / l) * u.col(j);
  }
  return {x_kappa, (x_kappa - x_full).norm()};
}

FrontierCurve frontier(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                       const Eigen::MatrixXd& sigma, const std::vector<double>& mu_grid,
                       double xi, BudgetMode budget_mode) {
  if (mu_grid.empty()) throw std::invalid_argument("mu grid must be non-empty");
  FrontierCurve curve;
  for (double mu : mu_grid) {
    try {
      const auto sol = solve_exact(build_kkt(r, pi, sigma, mu, xi, budget_mode));
      curve.points.push_back({mu, sol.risk, sol.weights});
    } catch (const std::exception& e) {
      curve.warnings.push_back("mu=" + std::to_string(mu) + " omitted: " + e.what());
    }
  }
  return curve;
}

double portfolio_risk(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != w.size() || sigma.cols() != w.size())
    throw std::invalid_argument("dimension mismatch");
  return w.dot(sigma * w);
}

}  // namespace qfolio::qp
