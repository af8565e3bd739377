// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "roma/param_set.hpp"

namespace roma {

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam step with bias correction and decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
// Consumes the gradients currently in `params` (does not zero them).
void adam_step(ParamSet& params, const AdamConfig& cfg);

}  // namespace roma
