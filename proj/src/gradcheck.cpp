#include "bottomup/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace bottomup {

namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return f(g, vars).value().item();
}

}  // namespace

std::vector<Tensor> analytic_gradients(const ScalarFn& f, std::span<const Tensor> inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  Var out = f(g, vars);
  auto grads = g.backward(out);
  std::vector<Tensor> result;
  result.reserve(vars.size());
  for (const auto& v : vars) result.push_back(grads.of(v));
  return result;
}

GradCheckResult finite_diff_check(const ScalarFn& f, std::span<const Tensor> inputs, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  const auto analytic = analytic_gradients(f, inputs);

  GradCheckResult res;
  std::vector<Tensor> work(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (std::size_t e = 0; e < work[k].size(); ++e) {
      const double saved = work[k][e];
      work[k][e] = saved + h;
      const double fp = evaluate(f, work);
      work[k][e] = saved - h;
      const double fm = evaluate(f, work);
      work[k][e] = saved;

      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][e];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > res.max_rel_error) res = {err, k, e, a, numeric};
    }
  }
  return res;
}

double finite_diff_check(const std::function<Var(Graph&, const Var&)>& f, const Tensor& x, double h) {
  const ScalarFn wrapped = [&f](Graph& g, std::span<const Var> in) { return f(g, in[0]); };
  return finite_diff_check(wrapped, std::span<const Tensor>(&x, 1), h).max_rel_error;
}

}  // namespace bottomup
