#include "qfolio/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qfolio::market {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    // trim whitespace
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_cell(const std::string& cell, int row, int col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != cell.size() || cell.empty()) {
    throw std::invalid_argument("non-numeric cell at (row " + std::to_string(row) +
                                ", column " + std::to_string(col) + ")");
  }
  return v;
}

}  // namespace

void PriceSeries::validate() const {
  const int n = n_assets();
  const int t = n_times();
  if (n < 2) throw std::invalid_argument("N >= 2 required");
  if (t < 2) throw std::invalid_argument("T' >= 2 required");
  if (static_cast<int>(asset_labels.size()) != n)
    throw std::invalid_argument("asset label count does not match row count");
  if (static_cast<int>(time_axis.size()) != t)
    throw std::invalid_argument("time axis length does not match column count");
  for (int s = 0; s < n; ++s)
    for (int k = 0; k < t; ++k)
      if (!(prices(s, k) > 0.0))
        throw std::invalid_argument("non-positive price at (row " + std::to_string(k + 1) +
                                    ", asset " + asset_labels[s] + ")");
  for (int k = 1; k < t; ++k)
    if (!(time_axis[k] > time_axis[k - 1]))
      throw std::invalid_argument("time axis not strictly increasing at row " +
                                  std::to_string(k + 1));
}

PriceSeries load_prices(const std::string& path, PriceFormat format) {
  if (format != PriceFormat::csv) throw std::invalid_argument("unsupported price format");
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open price file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty price file: " + path);
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw std::invalid_argument("N >= 2 required");
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 2) throw std::invalid_argument("N >= 2 required");

  std::vector<std::string> labels(header.begin() + 1, header.end());
  std::vector<double> time_axis;
  std::vector<std::vector<double>> rows;

  int row = 0;  // 1-based data row index in diagnostics
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("ragged row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    time_axis.push_back(parse_cell(fields[0], row, 1));
    std::vector<double> prices_row(n);
    for (int s = 0; s < n; ++s) {
      const double v = parse_cell(fields[s + 1], row, s + 2);
      if (!(v > 0.0))
        throw std::invalid_argument("non-positive price at (row " + std::to_string(row) +
                                    ", asset " + labels[s] + ")");
      prices_row[s] = v;
    }
    rows.push_back(std::move(prices_row));
  }

  const int t = static_cast<int>(rows.size());
  if (t < 2) throw std::invalid_argument("T' >= 2 required");

  PriceSeries out;
  out.prices.resize(n, t);
  for (int k = 0; k < t; ++k)
    for (int s = 0; s < n; ++s) out.prices(s, k) = rows[k][s];
  out.asset_labels = std::move(labels);
  out.time_axis = std::move(time_axis);
  out.validate();
  return out;
}

ReturnsPanel ReturnsPanel::from_returns(Eigen::MatrixXd y) {
  const int n = static_cast<int>(y.rows());
  const int t = static_cast<int>(y.cols());
  if (n < 1 || t < 1) throw std::invalid_argument("empty returns panel");
  if (t < 2) throw std::invalid_argument("need T >= 2");

  ReturnsPanel p;
  p.expected_return = y.rowwise().mean();
  const Eigen::MatrixXd centered = y.colwise() - p.expected_return;
  p.covariance = (centered * centered.transpose()) / static_cast<double>(t - 1);
  // exact symmetry for downstream eigensolvers
  p.covariance = 0.5 * (p.covariance + p.covariance.transpose()).eval();
  p.norm_y = y.norm();
  p.norm_y_prime = y.rowwise().sum().norm();
  p.norm_y_tilde = centered.norm();
  p.returns = std::move(y);
  return p;
}

ReturnsPanel compute_returns(const PriceSeries& p, int dt_period) {
  p.validate();
  const int t_prime = p.n_times();
  if (dt_period < 1 || dt_period >= t_prime)
    throw std::invalid_argument("dt_period must be positive and < T'");
  const int t = t_prime - dt_period;
  if (t < 2) throw std::invalid_argument("need T >= 2");

  Eigen::MatrixXd y(p.n_assets(), t);
  for (int s = 0; s < p.n_assets(); ++s)
    for (int k = 0; k < t; ++k)
      y(s, k) = (p.prices(s, k + dt_period) - p.prices(s, k)) / p.prices(s, k);
  return ReturnsPanel::from_returns(std::move(y));
}

PriceSeries generate_synthetic(const FactorModelSpec& spec, int n_assets, int n_times) {
  if (n_assets < 2) throw std::invalid_argument("n_assets >= 2 required");
  if (n_times < 3) throw std::invalid_argument("n_times >= 3 required");
  if (spec.n_factors < 1 || spec.n_factors > n_assets)
    throw std::invalid_argument("n_factors must be in [1, n_assets]");
  if (spec.loadings_scale < 0 || spec.idiosyncratic_scale < 0)
    throw std::invalid_argument("scales must be non-negative");
  if (spec.drift.size() != 0 && spec.drift.size() != n_assets)
    throw std::invalid_argument("drift must be empty or length n_assets");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd loadings(n_assets, spec.n_factors);
  for (int s = 0; s < n_assets; ++s)
    for (int f = 0; f < spec.n_factors; ++f) loadings(s, f) = spec.loadings_scale * gauss(rng);

  const int t_returns = n_times - 1;
  Eigen::MatrixXd y(n_assets, t_returns);
  for (int k = 0; k < t_returns; ++k) {
    Eigen::VectorXd factors(spec.n_factors);
    for (int f = 0; f < spec.n_factors; ++f) factors(f) = gauss(rng);
    Eigen::VectorXd col = loadings * factors;
    for (int s = 0; s < n_assets; ++s) {
      col(s) += spec.idiosyncratic_scale * gauss(rng);
      if (spec.drift.size() > 0) col(s) += spec.drift(s);
      y(s, k) = std::max(col(s), -0.9);  // keeps prices positive
    }
  }

  PriceSeries out;
  out.prices.resize(n_assets, n_times);
  out.prices.col(0).setConstant(100.0);
  for (int k = 0; k < t_returns; ++k)
    out.prices.col(k + 1) = out.prices.col(k).cwiseProduct(Eigen::VectorXd::Ones(n_assets) + y.col(k));
  out.asset_labels.resize(n_assets);
  for (int s = 0; s < n_assets; ++s) out.asset_labels[s] = "A" + std::to_string(s + 1);
  out.time_axis.resize(n_times);
  for (int k = 0; k < n_times; ++k) out.time_axis[k] = k + 1;
  out.validate();
  return out;
}

}  // namespace qfolio::market
