// SPDX-License-Identifier: Apache-2.0
#include "roma/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace roma {

void adam_step(ParamSet& params, const AdamConfig& cfg) {
  if (cfg.lr <= 0) throw std::invalid_argument("adam_step: lr must be positive");
  params.adam_t += 1;
  const double t = static_cast<double>(params.adam_t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : params) {
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      const double g = e.grad.data[i];
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = e.m.data[i] / bc1;
      const double v_hat = e.v.data[i] / bc2;
      double& w = e.value.data[i];
      const double decay = cfg.lr * cfg.weight_decay * w;  // from pre-update value
      w -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      w -= decay;
    }
  }
}

}  // namespace roma
