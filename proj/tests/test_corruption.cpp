// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "roma/corruption.hpp"
#include "roma/rng.hpp"

using namespace roma;

namespace {

ImageBuffer random_image(int h, int w, int c, uint64_t seed) {
  ImageBuffer img(h, w, c);
  Rng rng(seed);
  for (double& v : img.data) v = rng.uniform01();
  return img;
}

// Exact central binomial interval: smallest symmetric-tail [lo, hi] with
// P(X < lo) <= tail and P(X > hi) <= tail.
std::pair<int, int> binomial_central_interval(int n, double p, double tail) {
  std::vector<double> pmf(static_cast<size_t>(n) + 1);
  // iterative pmf to avoid overflow
  pmf[0] = std::pow(1.0 - p, n);
  for (int k = 1; k <= n; ++k)
    pmf[static_cast<size_t>(k)] = pmf[static_cast<size_t>(k - 1)] *
                                  ((n - k + 1) / static_cast<double>(k)) * (p / (1.0 - p));
  int lo = 0;
  double acc = 0.0;
  while (lo <= n && acc + pmf[static_cast<size_t>(lo)] <= tail)
    acc += pmf[static_cast<size_t>(lo++)];
  int hi = n;
  acc = 0.0;
  while (hi >= 0 && acc + pmf[static_cast<size_t>(hi)] <= tail)
    acc += pmf[static_cast<size_t>(hi--)];
  return {lo, hi};
}

}  // namespace

TEST_CASE("posterize quantization formula") {
  ImageBuffer img(1, 1, 1, 0.70);
  const ImageBuffer out = apply(img, {CorruptionKind::posterize, 2, 0});
  CHECK(out.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("posterize b=2 emits at most 4 distinct values") {
  const ImageBuffer img = random_image(48, 48, 1, 1);
  const ImageBuffer out = apply(img, {CorruptionKind::posterize, 2, 0});
  std::set<double> values(out.data.begin(), out.data.end());
  CHECK(values.size() <= 4);
}

TEST_CASE("gaussian noise with sigma 0 is bitwise identity") {
  const ImageBuffer img = random_image(16, 16, 1, 2);
  const ImageBuffer out = apply(img, {CorruptionKind::gaussian_noise, 0.0, 42});
  CHECK(out.data == img.data);
  CHECK(out.provenance == Provenance::degraded);
}

TEST_CASE("salt-and-pepper replacement count lies in the binomial band") {
  ImageBuffer img(48, 48, 1, 0.5);  // strictly interior values
  const ImageBuffer out = apply(img, {CorruptionKind::salt_pepper, 0.05, 7});
  int replaced = 0;
  for (const double v : out.data) replaced += (v == 0.0 || v == 1.0) ? 1 : 0;
  // stated band for n=2304, p=0.05
  CHECK(replaced >= 81);
  CHECK(replaced <= 152);
  const auto [lo, hi] = binomial_central_interval(2304, 0.05, 0.0005);
  CHECK(replaced >= lo);
  CHECK(replaced <= hi);
}

TEST_CASE("salt-and-pepper replaces whole pixels across channels") {
  ImageBuffer img(16, 16, 3, 0.5);
  const ImageBuffer out = apply(img, {CorruptionKind::salt_pepper, 0.3, 11});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const double r = out.at(y, x, 0);
      CHECK(out.at(y, x, 1) == r);
      CHECK(out.at(y, x, 2) == r);
    }
}

TEST_CASE("idempotent kinds: posterize and pixelate") {
  const ImageBuffer img = random_image(48, 48, 1, 3);
  for (const CorruptionSpec spec :
       {CorruptionSpec{CorruptionKind::posterize, 4, 0},
        CorruptionSpec{CorruptionKind::pixelate, 0.25, 0},
        CorruptionSpec{CorruptionKind::pixelate, 0.12, 0}}) {
    const ImageBuffer once = apply(img, spec);
    const ImageBuffer twice = apply(once, spec);
    CHECK(once.data == twice.data);
  }
}

TEST_CASE("all operators preserve [0,1] and image dimensions") {
  const ImageBuffer img = random_image(48, 48, 1, 4);
  for (int level = 1; level <= 3; ++level) {
    for (const auto pool : {std::vector<CorruptionKind>(kSeenKinds.begin(), kSeenKinds.end()),
                            std::vector<CorruptionKind>(kUnseenKinds.begin(), kUnseenKinds.end())}) {
      for (const CorruptionKind kind : pool) {
        const ImageBuffer out = apply(img, eval_spec(kind, level, 5));
        CHECK(out.same_dims(img));
        CHECK(out.in_unit_range());
        CHECK(out.provenance == Provenance::degraded);
      }
    }
  }
}

TEST_CASE("apply is run-to-run deterministic") {
  const ImageBuffer img = random_image(48, 48, 1, 6);
  for (const CorruptionKind kind : kUnseenKinds) {
    const CorruptionSpec spec = eval_spec(kind, 2, 99);
    CHECK(apply(img, spec).data == apply(img, spec).data);
  }
  for (const CorruptionKind kind : kSeenKinds) {
    const CorruptionSpec spec = eval_spec(kind, 2, 99);
    CHECK(apply(img, spec).data == apply(img, spec).data);
  }
}

TEST_CASE("epsilon identities") {
  const ImageBuffer img = random_image(48, 48, 1, 8);
  const ImageBuffer motion = apply(img, {CorruptionKind::motion_blur, 1, 0});
  CHECK(motion.data == img.data);
  const ImageBuffer pix = apply(img, {CorruptionKind::pixelate, 1.0, 0});
  CHECK(pix.data == img.data);
  const ImageBuffer post = apply(img, {CorruptionKind::posterize, 8, 0});
  double max_dev = 0.0;
  for (size_t i = 0; i < img.data.size(); ++i)
    max_dev = std::max(max_dev, std::abs(post.data[i] - img.data[i]));
  CHECK(max_dev <= 1.0 / (2.0 * 255.0));
}

TEST_CASE("pixelate f=0.25 yields constant 4x4 blocks") {
  const ImageBuffer img = random_image(48, 48, 1, 9);
  const ImageBuffer out = apply(img, {CorruptionKind::pixelate, 0.25, 0});
  for (int by = 0; by < 48; by += 4)
    for (int bx = 0; bx < 48; bx += 4) {
      const double v0 = out.at(by, bx);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out.at(by + y, bx + x) == v0);
    }
}

TEST_CASE("training spec sampling matches the documented distributions") {
  const AugmentationPool pool = AugmentationPool::seen();
  Rng rng(12);
  std::map<CorruptionKind, int> kind_counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const CorruptionSpec spec = sample_training_spec(pool, rng);
    kind_counts[spec.kind] += 1;
    switch (spec.kind) {
      case CorruptionKind::gaussian_noise:
        CHECK(spec.param == 0.05);
        break;
      case CorruptionKind::gaussian_blur:
        CHECK(spec.param >= 0.5);
        CHECK(spec.param <= 2.0);
        break;
      case CorruptionKind::jpeg_compression: {
        CHECK(spec.param == std::floor(spec.param));
        CHECK(spec.param >= 30);
        CHECK(spec.param <= 85);
        break;
      }
      case CorruptionKind::resolution_scale:
        CHECK(spec.param >= 0.3);
        CHECK(spec.param <= 0.7);
        break;
      default:
        FAIL("sampled a held-out kind");
    }
  }
  for (const CorruptionKind kind : kSeenKinds) {
    const double freq = kind_counts[kind] / static_cast<double>(n);
    CHECK(freq > 0.23);
    CHECK(freq < 0.27);
  }
}

TEST_CASE("sample_k_distinct draws pairwise-distinct kinds") {
  const AugmentationPool pool = AugmentationPool::seen();
  Rng rng(13);
  const auto specs = sample_k_distinct(pool, 3, rng);
  REQUIRE(specs.size() == 3);
  std::set<CorruptionKind> kinds;
  for (const auto& s : specs) kinds.insert(s.kind);
  CHECK(kinds.size() == 3);

  const auto all4 = sample_k_distinct(pool, 4, rng);
  std::set<CorruptionKind> kinds4;
  for (const auto& s : all4) kinds4.insert(s.kind);
  CHECK(kinds4.size() == 4);

  CHECK_THROWS_AS(sample_k_distinct(pool, 5, rng), std::invalid_argument);
}

TEST_CASE("severity table values") {
  CHECK(eval_spec(CorruptionKind::gaussian_noise, 3).param == 0.12);
  CHECK(eval_spec(CorruptionKind::posterize, 2).param == 4);
  CHECK(eval_spec(CorruptionKind::gaussian_blur, 1).param == 1.0);
  CHECK(eval_spec(CorruptionKind::jpeg_compression, 3).param == 15);
  CHECK(eval_spec(CorruptionKind::motion_blur, 2).param == 15);
  CHECK_THROWS_AS(eval_spec(CorruptionKind::speckle, 4), std::invalid_argument);
}

TEST_CASE("level-3 seen parameters sit strictly outside the training support") {
  CHECK(eval_spec(CorruptionKind::gaussian_noise, 3).param > 0.05);
  CHECK(eval_spec(CorruptionKind::gaussian_blur, 3).param > 2.0);
  CHECK(eval_spec(CorruptionKind::jpeg_compression, 3).param < 30);
  CHECK(eval_spec(CorruptionKind::resolution_scale, 3).param < 0.3);
}

TEST_CASE("illegal parameters are rejected") {
  const ImageBuffer img = random_image(8, 8, 1, 10);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::jpeg_compression, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::motion_blur, 4, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::posterize, 9, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::pixelate, 0.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::salt_pepper, 1.5, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply(img, {CorruptionKind::gaussian_noise, -0.1, 0}), std::invalid_argument);
}

TEST_CASE("seen and unseen pools partition the nine kinds") {
  std::set<CorruptionKind> all;
  for (const CorruptionKind k : kSeenKinds) all.insert(k);
  for (const CorruptionKind k : kUnseenKinds) all.insert(k);
  CHECK(all.size() == 9);
  CHECK(kSeenKinds.size() == 4);
  CHECK(kUnseenKinds.size() == 5);
}

TEST_CASE("severity table CSV layout") {
  const std::string csv = severity_table_csv();
  CHECK(csv.find("degradation,parameter,training,level1,level2,level3") == 0);
  CHECK(csv.find("gaussian_noise,sigma,0.05,0.03,0.06,0.12") != std::string::npos);
  CHECK(csv.find("pixelate,scale,held-out,0.5,0.25,0.12") != std::string::npos);
  // one header + nine kind rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}
