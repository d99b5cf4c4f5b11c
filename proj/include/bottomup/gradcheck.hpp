#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bottomup/graph.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup {

/// Builds a scalar on `g` from leaves holding the given inputs.
using ScalarFn = std::function<Var(Graph& g, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference check of reverse-mode gradients of `f` w.r.t. every
/// element of every input. Error per element is
/// |analytic - numeric| / max(1, |analytic|); the maximum is reported.
GradCheckResult finite_diff_check(const ScalarFn& f, std::span<const Tensor> inputs, double h = 1e-5);

/// Single-input convenience form.
double finite_diff_check(const std::function<Var(Graph&, const Var&)>& f, const Tensor& x, double h = 1e-5);

/// Reverse-mode gradient of `f` at `inputs`, one tensor per input.
std::vector<Tensor> analytic_gradients(const ScalarFn& f, std::span<const Tensor> inputs);

}  // namespace bottomup
