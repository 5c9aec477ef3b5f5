#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qfolio::qp {

enum class BudgetMode { prices, unit };

/// Symmetric (N+2)-dimensional KKT system of the equality-constrained
/// mean-variance program. Row/col 0 carries R, row/col 1 carries the budget
/// vector (prices or all-ones), the lower-right block is Sigma.
struct KKTSystem {
  Eigen::MatrixXd m_matrix;  // (N+2) x (N+2)
  Eigen::MatrixXd m_hat;     // m_matrix / trace(m_matrix)
  Eigen::VectorXd rhs;       // (mu, xi, 0, ..., 0)
  double mu = 0.0;
  double xi = 0.0;

  int n_assets() const { return static_cast<int>(m_matrix.rows()) - 2; }
  double trace() const { return m_matrix.trace(); }
  Eigen::VectorXd return_vector() const { return m_matrix.row(0).tail(n_assets()); }
  Eigen::VectorXd budget_vector() const { return m_matrix.row(1).tail(n_assets()); }
  Eigen::MatrixXd sigma() const { return m_matrix.bottomRightCorner(n_assets(), n_assets()); }
};

struct PortfolioSolution {
  double eta = 0.0;   // multiplier of the return constraint
  double theta = 0.0; // multiplier of the budget constraint
  Eigen::VectorXd weights;
  double achieved_return = 0.0;
  double achieved_budget = 0.0;
  double risk = 0.0;  // w^T Sigma w
  std::optional<double> kappa_used;
  double epsilon_kappa = 0.0;
};

struct FrontierPoint {
  double mu = 0.0;
  double min_risk = 0.0;
  Eigen::VectorXd weights;
};

struct FrontierCurve {
  std::vector<FrontierPoint> points;          // ordered by the input grid
  std::vector<std::string> warnings;          // one entry per omitted grid point
};

KKTSystem build_kkt(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                    const Eigen::MatrixXd& sigma, double mu, double xi,
                    BudgetMode budget_mode = BudgetMode::prices);

/// Exact eigendecomposition pseudo-inverse solve (zero cutoff 1e-12 * max|lambda|).
/// Throws "infeasible target" when rhs has a component outside range(M).
PortfolioSolution solve_exact(const KKTSystem& k);

/// Conditioned pseudo-inverse: keeps eigenvalues |lambda_j| >= 1/kappa.
/// Returns the truncated solution and epsilon_kappa, the l2 distance to the
/// full pseudo-inverse applied to b.
std::pair<Eigen::VectorXd, double> pseudo_inverse_kappa(const Eigen::MatrixXd& m_hat,
                                                        const Eigen::VectorXd& b,
                                                        double kappa);

FrontierCurve frontier(const Eigen::VectorXd& r, const Eigen::VectorXd& pi,
                       const Eigen::MatrixXd& sigma, const std::vector<double>& mu_grid,
                       double xi, BudgetMode budget_mode = BudgetMode::prices);

double portfolio_risk(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);

}  // namespace qfolio::qp
