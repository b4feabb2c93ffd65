#pragma once

// Acceptance suite shared by the `selftest` subcommand and the acceptance test.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fracsmp::selftest {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double measured = 0.0;   // worst observed value of the governing metric
  double tolerance = 0.0;  // threshold the metric is compared against
  std::string detail;
};

struct AcceptanceReport {
  std::vector<CriterionResult> criteria;
  // Report files by name; every number is printed with 17 significant digits.
  std::map<std::string, std::string> files;

  bool pass() const;
};

/// Runs criteria 1..11 and then, when `check_determinism` is set, reruns them
/// and compares every report file byte for byte (criterion 12).
AcceptanceReport run_acceptance(std::uint64_t seed, bool check_determinism = true);

/// "PASS 04 bsde oracle ...": one line per criterion.
std::string format_line(const CriterionResult& c);

void write_report(const AcceptanceReport& report, const std::filesystem::path& dir);

}  // namespace fracsmp::selftest
