#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace smc::harness {

struct SelftestOptions {
  // Mutation smoke tests: flip the search boundary comparison, or hand the
  // accept-reject sampler a sigma_plus below the true kernel maximum.
  bool inject_search_fault = false;
  bool understate_sigma_plus = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestSummary {
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
  std::vector<std::string> failed_names() const;
};

// Small-instance invariant suite. Never throws: an exception inside a check
// is recorded as that check's failure.
SelftestSummary selftest(const SelftestOptions& options = {});

void print_summary(const SelftestSummary& summary, std::ostream& out);

}  // namespace smc::harness
