#include "bottomup/optim.hpp"

#include <cmath>

namespace bottomup {

void Adam::step(ParamSet& params, const std::vector<Tensor>& grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size()) throw ContractError("Adam: gradient count does not match parameters");
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.value.shape());
      v_.emplace_back(e.value.shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    require_same_shape(entries[k].value, grads[k], "Adam");
    auto p = entries[k].value.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    const auto g = grads[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace bottomup
