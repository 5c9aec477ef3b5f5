#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qfolio::verify {

struct VerifyConfig {
  std::uint64_t seed = 20250810;
  int hhl_phase_bits = 10;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string details;
  double seconds = 0.0;  // console diagnostics only, never serialized
};

/// Criteria 1-10 in order. Progress lines go to `progress` when non-null.
std::vector<CriterionResult> run_criteria(const VerifyConfig& cfg, std::ostream* progress);

/// Criteria 1-11; #11 reruns 1-10 and byte-compares the serialized reports.
std::vector<CriterionResult> run_all(const VerifyConfig& cfg, std::ostream* progress);

/// Deterministic machine-readable report (timings excluded).
nlohmann::json report_json(const std::vector<CriterionResult>& results, const VerifyConfig& cfg);

std::string console_line(const CriterionResult& r);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace qfolio::verify
