#pragma once

// Finite-difference checks over every differentiable operation of the
// library, shared by the `gradcheck` subcommand and the tests.

#include <cstdint>
#include <string>
#include <vector>

#include "hypergpa/gradcheck.hpp"

namespace hypergpa {

struct GradCase {
  std::string name;
  double tolerance = 1e-4;
  GradCheckResult result;
  bool passed() const { return result.max_rel_error < tolerance; }
};

std::vector<std::string> grad_case_names();

// Runs every case whose name contains `filter` (all when empty).
std::vector<GradCase> run_grad_suite(std::uint64_t seed, const std::string& filter = "");

}  // namespace hypergpa
