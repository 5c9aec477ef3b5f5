#pragma once

#include "qfolio/hhl.hpp"
#include "qfolio/market_data.hpp"
#include "qfolio/portfolio_qp.hpp"
#include "qfolio/qsim.hpp"
#include "qfolio/readout.hpp"
#include "qfolio/state_prep.hpp"

#include <json.hpp>

#include <string>

namespace qfolio::io {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const market::ReturnsPanel& panel);
nlohmann::json to_json(const qp::FrontierCurve& curve);
nlohmann::json to_json(const prep::KPTree& tree);
nlohmann::json to_json(const qsim::QuantumState& state);
nlohmann::json to_json(const qsim::DensityMatrix& dm);
nlohmann::json to_json(const hhl::HHLResult& result);
nlohmann::json to_json(const readout::SwapTestEstimate& est);
nlohmann::json to_json(const readout::SamplingResult& result);
nlohmann::json to_json(const readout::SamplingErrorReport& report);
nlohmann::json to_json(const readout::QuantumFrontier& frontier);

std::string frontier_csv(const qp::FrontierCurve& curve);            // mu,risk
std::string frontier_csv(const readout::QuantumFrontier& frontier);  // mu,risk_classical,risk_quantum,fidelity

void write_file(const std::string& path, const std::string& content);

}  // namespace qfolio::io
