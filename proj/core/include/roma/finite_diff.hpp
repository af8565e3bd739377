// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>

#include "roma/param_set.hpp"

namespace roma {

// Central-difference gradient estimate of a deterministic scalar function of
// the parameters. The function is evaluated twice at the unperturbed point
// first; any bitwise disagreement means hidden randomness and is an error.
std::map<std::string, Tensor> finite_diff_grad(
    const std::function<double(const ParamSet&)>& f, const ParamSet& params,
    double h = 1e-4);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
};

// Max relative error between analytic and finite-difference gradients, with
// denominators floored at `floor`.
GradCheckResult compare_grads(const std::map<std::string, Tensor>& numeric,
                              const ParamSet& analytic, double floor = 1e-8);

}  // namespace roma
