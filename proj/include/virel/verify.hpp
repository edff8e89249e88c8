#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "virel/boltzmann.hpp"

namespace virel {

enum class Relation { kLess, kLessEqual, kGreaterEqual };
const char* to_string(Relation r);

struct CheckResult {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::kLess;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  /// Random draws per finite-difference check.
  std::size_t draws = 50;
  std::uint64_t seed = 0;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::vector<std::string> failures() const;
};

/// suite is one of theorems, operators, gradients, all.
VerifyReport run_verify(const std::string& suite, const VerifyOptions& options = {});

/// {"suite", "passed", "checks": [{"suite", "name", "measured_error",
/// "tolerance", "relation", "passed", "detail"}]}
nlohmann::ordered_json to_json(const VerifyReport& report);

/// Dirac-limit traces on the verification fixtures, for CSV export.
std::vector<DiracTrace> dirac_fixture_traces(std::uint64_t seed, std::size_t count = 50);

/// Relative error |a - b| / max(|a|, |b|, floor) in the Euclidean norm.
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8);

}  // namespace virel
