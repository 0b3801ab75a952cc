#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace setmetric {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs every built-in invariant and oracle check. Deterministic in `seed`.
std::vector<CheckResult> run_verification(std::uint64_t seed = 0);

}  // namespace setmetric
