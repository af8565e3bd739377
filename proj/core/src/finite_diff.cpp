// SPDX-License-Identifier: Apache-2.0
#include "roma/finite_diff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace roma {

std::map<std::string, Tensor> finite_diff_grad(
    const std::function<double(const ParamSet&)>& f, const ParamSet& params,
    double h) {
  if (h <= 0) throw std::invalid_argument("finite_diff_grad: h must be positive");
  ParamSet p;
  for (const auto& [name, e] : params) p.add(name, e.value);
  const double f0 = f(p);
  const double f0_again = f(p);
  if (std::memcmp(&f0, &f0_again, sizeof(double)) != 0)
    throw std::runtime_error("finite_diff_grad: function is not deterministic");

  std::map<std::string, Tensor> grads;
  for (auto& [name, e] : p) {
    Tensor g = Tensor::zeros(e.value.shape);
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      const double saved = e.value.data[i];
      e.value.data[i] = saved + h;
      const double fp = f(p);
      e.value.data[i] = saved - h;
      const double fm = f(p);
      e.value.data[i] = saved;
      g.data[i] = (fp - fm) / (2.0 * h);
    }
    grads.emplace(name, std::move(g));
  }
  return grads;
}

GradCheckResult compare_grads(const std::map<std::string, Tensor>& numeric,
                              const ParamSet& analytic, double floor) {
  GradCheckResult r;
  for (const auto& [name, num] : numeric) {
    const Tensor& ana = analytic.entry(name).grad;
    if (!ana.same_shape(num))
      throw std::invalid_argument("compare_grads: shape mismatch for " + name);
    for (size_t i = 0; i < num.data.size(); ++i) {
      const double denom = std::max({std::abs(num.data[i]), std::abs(ana.data[i]), floor});
      const double rel = std::abs(num.data[i] - ana.data[i]) / denom;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_param = name;
        r.worst_index = static_cast<int64_t>(i);
      }
    }
  }
  return r;
}

}  // namespace roma
