#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bottomup {

/// Map size used to shape every case in the suite.
struct GradSize {
  std::size_t h = 0, w = 0, c = 0;
};

/// Parses "6x5x4". Throws ContractError on malformed text, zero sizes, or an
/// odd channel count (the positional encoding needs pairs).
GradSize parse_grad_size(std::string_view text);
std::string to_string(const GradSize& s);

struct OpCheck {
  std::string op;
  std::string size;
  int trials = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradSuiteReport {
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::vector<OpCheck> checks;
  double seconds = 0.0;
  bool passed() const;
  double worst() const;
};

/// Names of every case, differentiable ops first and composed blocks last.
std::vector<std::string> grad_suite_ops();

/// Finite-difference checks of every case at every size, `trials` random
/// draws each.
GradSuiteReport run_grad_suite(std::uint64_t seed, std::span<const GradSize> sizes, int trials, double tol,
                               double step = 1e-6);

std::string grad_report_json(const GradSuiteReport& report);

}  // namespace bottomup
