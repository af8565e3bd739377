// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "roma/param_set.hpp"
#include "roma/rng.hpp"

using namespace roma;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

ParamSet make_params(uint64_t seed) {
  Rng rng(seed);
  ParamSet ps;
  Tensor a({3, 4});
  Tensor b({7});
  Tensor c(std::vector<int64_t>{});
  for (double& v : a.data) v = rng.gaussian();
  for (double& v : b.data) v = rng.gaussian();
  c.data[0] = rng.gaussian();
  ps.add("zeta", std::move(a));
  ps.add("alpha.w", std::move(b));
  ps.add("mid/bias", std::move(c));
  return ps;
}

}  // namespace

TEST_CASE("parameter file round-trips bit-exactly") {
  const ParamSet ps = make_params(5);
  const auto path = temp_file("roma_params_test.bin");
  ps.save(path.string());
  const ParamSet back = ParamSet::load(path.string());
  REQUIRE(back.values_equal(ps));
  fs::remove(path);
}

TEST_CASE("file starts with a versioned ASCII header line") {
  const ParamSet ps = make_params(6);
  const auto path = temp_file("roma_params_header.bin");
  ps.save(path.string());
  std::ifstream is(path, std::ios::binary);
  std::string header;
  std::getline(is, header);
  CHECK(header.rfind("roma-tensors v1", 0) == 0);
  fs::remove(path);
}

TEST_CASE("loading a non-parameter file fails") {
  const auto path = temp_file("roma_params_bogus.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a tensor file\n12345";
  }
  CHECK_THROWS_AS(ParamSet::load(path.string()), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("truncated payload fails loudly") {
  const ParamSet ps = make_params(7);
  const auto path = temp_file("roma_params_trunc.bin");
  ps.save(path.string());
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 9);
  CHECK_THROWS_AS(ParamSet::load(path.string()), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("gradient buffers match parameter shapes and zero out") {
  ParamSet ps = make_params(8);
  for (auto& [name, e] : ps) {
    REQUIRE(e.grad.same_shape(e.value));
    for (double& g : e.grad.data) g = 1.5;
  }
  ps.zero_grad();
  for (const auto& [name, e] : ps)
    for (const double g : e.grad.data) REQUIRE(g == 0.0);
}

TEST_CASE("iteration is sorted by name") {
  const ParamSet ps = make_params(9);
  std::string prev;
  for (const auto& [name, e] : ps) {
    CHECK(prev < name);
    prev = name;
  }
}

TEST_CASE("duplicate names are rejected") {
  ParamSet ps;
  ps.add("w", Tensor({2}));
  CHECK_THROWS_AS(ps.add("w", Tensor({2})), std::invalid_argument);
}

TEST_CASE("optimizer state round-trips with the step counter") {
  ParamSet ps = make_params(10);
  Rng rng(77);
  for (auto& [name, e] : ps) {
    for (double& v : e.m.data) v = rng.gaussian();
    for (double& v : e.v.data) v = rng.uniform01();
  }
  ps.adam_t = 321;
  const auto path = temp_file("roma_opt_state.bin");
  ps.save_opt_state(path.string());

  ParamSet fresh = make_params(10);
  fresh.load_opt_state(path.string());
  REQUIRE(fresh.adam_t == 321);
  for (const auto& [name, e] : ps) {
    CHECK(fresh.entry(name).m.data == e.m.data);
    CHECK(fresh.entry(name).v.data == e.v.data);
  }
  fs::remove(path);
}
