// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "roma/rng.hpp"

using roma::Rng;

TEST_CASE("identical seeds reproduce the stream bitwise") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("named streams are independent of draw order") {
  Rng root(7);
  Rng s1 = root.stream("alpha");
  root.next_u64();  // advancing the parent state must not shift children
  Rng s2 = root.stream("alpha");
  for (int i = 0; i < 100; ++i) REQUIRE(s1.next_u64() == s2.next_u64());
  Rng other = root.stream("beta");
  REQUIRE(other.next_u64() != Rng(7).stream("alpha").next_u64());
}

TEST_CASE("forks with distinct indices differ") {
  Rng root(9);
  std::set<uint64_t> first;
  for (uint64_t i = 0; i < 64; ++i) first.insert(root.fork(i).next_u64());
  REQUIRE(first.size() == 64);
}

TEST_CASE("uniform01 stays in [0,1)") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("below is unbiased over small ranges") {
  Rng rng(5);
  int counts[5] = {0};
  const int n = 50000;
  for (int i = 0; i < n; ++i) counts[rng.below(5)] += 1;
  for (const int c : counts) {
    REQUIRE(c > n / 5 - 600);
    REQUIRE(c < n / 5 + 600);
  }
}

TEST_CASE("gaussian moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.gaussian();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform_int covers inclusive bounds") {
  Rng rng(13);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 1000; ++i) {
    const int v = rng.uniform_int(30, 85);
    REQUIRE(v >= 30);
    REQUIRE(v <= 85);
    saw_lo = saw_lo || v == 30;
    saw_hi = saw_hi || v == 85;
  }
  REQUIRE(saw_lo);
  REQUIRE(saw_hi);
}
