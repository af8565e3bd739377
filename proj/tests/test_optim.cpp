// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>

#include "roma/optim.hpp"

using namespace roma;

TEST_CASE("zero gradient with zero weight decay leaves parameters unchanged") {
  ParamSet ps;
  ps.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(ps, cfg);
  CHECK(ps.value("w").at(0) == 1.0);
  CHECK(ps.value("w").at(1) == -2.0);
  CHECK(ps.value("w").at(2) == 0.5);
}

TEST_CASE("first step with unit gradient moves by about -lr") {
  // closed form: m_hat = v_hat = 1 after bias correction, so the step is
  // -lr / (1 + eps)
  ParamSet ps;
  ps.add("w", Tensor::scalar(0.0));
  ps.grad("w").data[0] = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  adam_step(ps, cfg);
  CHECK(ps.value("w").value() == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("decay-only step") {
  ParamSet ps;
  ps.add("w", Tensor::scalar(1.0));
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  adam_step(ps, cfg);
  CHECK(ps.value("w").value() == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("non-positive learning rate is rejected") {
  ParamSet ps;
  ps.add("w", Tensor::scalar(1.0));
  AdamConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(adam_step(ps, cfg), std::invalid_argument);
}

TEST_CASE("adam_t advances once per step") {
  ParamSet ps;
  ps.add("w", Tensor::scalar(1.0));
  AdamConfig cfg;
  adam_step(ps, cfg);
  adam_step(ps, cfg);
  CHECK(ps.adam_t == 2);
}
