#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace qfolio::market {

enum class PriceFormat { csv };

/// N x T' panel of strictly positive asset prices with time metadata.
struct PriceSeries {
  Eigen::MatrixXd prices;                  // rows = assets, cols = time ticks
  std::vector<std::string> asset_labels;   // size N
  std::vector<double> time_axis;           // size T', strictly increasing

  int n_assets() const { return static_cast<int>(prices.rows()); }
  int n_times() const { return static_cast<int>(prices.cols()); }

  /// Throws std::invalid_argument on any invariant violation.
  void validate() const;
};

/// Returns y_s(t) together with the derived statistics R, Sigma and the
/// three norms |y|, |y'|, |y~| used by the amplitude-encoding stages.
struct ReturnsPanel {
  Eigen::MatrixXd returns;          // N x T
  Eigen::VectorXd expected_return;  // R, length N
  Eigen::MatrixXd covariance;       // Sigma, N x N, 1/(T-1) normalization
  double norm_y = 0.0;              // sqrt(sum y^2)
  double norm_y_prime = 0.0;        // sqrt(sum_s (sum_t y)^2)
  double norm_y_tilde = 0.0;        // sqrt(sum (y - rowmean)^2) = sqrt((T-1) tr Sigma)

  int n_assets() const { return static_cast<int>(returns.rows()); }
  int n_times() const { return static_cast<int>(returns.cols()); }

  /// Builds the full panel (R, Sigma, norms) from a raw returns matrix.
  /// Requires T >= 2 so the 1/(T-1) covariance is defined.
  static ReturnsPanel from_returns(Eigen::MatrixXd y);
};

/// Factor-model generator controls. With idiosyncratic_scale = 0 the sample
/// covariance of the generated returns has numerical rank n_factors.
struct FactorModelSpec {
  int n_factors = 1;
  double loadings_scale = 0.02;
  double idiosyncratic_scale = 0.005;
  Eigen::VectorXd drift;  // length N or empty (= zero drift)
  std::uint64_t seed = 0;
};

PriceSeries load_prices(const std::string& path, PriceFormat format = PriceFormat::csv);

/// y_s(t) = (P_s(t + dt_period) - P_s(t)) / P_s(t), output T = T' - dt_period.
ReturnsPanel compute_returns(const PriceSeries& p, int dt_period);

PriceSeries generate_synthetic(const FactorModelSpec& spec, int n_assets, int n_times);

}  // namespace qfolio::market
