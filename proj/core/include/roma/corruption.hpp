// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "roma/image.hpp"
#include "roma/rng.hpp"

namespace roma {

// The nine degradation operators. The first four are the SEEN pool (used with
// bounded parameters during training); the last five are held out entirely.
enum class CorruptionKind {
  gaussian_noise,
  gaussian_blur,
  jpeg_compression,
  resolution_scale,
  motion_blur,
  salt_pepper,
  speckle,
  posterize,
  pixelate,
};

constexpr std::array<CorruptionKind, 4> kSeenKinds = {
    CorruptionKind::gaussian_noise, CorruptionKind::gaussian_blur,
    CorruptionKind::jpeg_compression, CorruptionKind::resolution_scale};

constexpr std::array<CorruptionKind, 5> kUnseenKinds = {
    CorruptionKind::motion_blur, CorruptionKind::salt_pepper,
    CorruptionKind::speckle, CorruptionKind::posterize, CorruptionKind::pixelate};

const char* kind_name(CorruptionKind kind);
CorruptionKind kind_from_name(const std::string& name);

// One degradation: kind, scalar parameter (sigma, radius, quality, scale,
// kernel size, probability or bit depth depending on kind) and a noise seed
// for the stochastic kinds. Application is deterministic given (image, spec).
struct CorruptionSpec {
  CorruptionKind kind;
  double param = 0.0;
  uint64_t seed = 0;
};

// Throws if the parameter is outside the kind's legal range.
void validate_spec(const CorruptionSpec& spec);

ImageBuffer apply(const ImageBuffer& img, const CorruptionSpec& spec);

// Kinds eligible for training-time augmentation sampling. Only seen kinds
// have a training distribution.
struct AugmentationPool {
  std::vector<CorruptionKind> kinds;
  static AugmentationPool seen();
};

// Kind uniform over the pool; parameter from the kind's training
// distribution; fresh noise seed derived from rng.
CorruptionSpec sample_training_spec(const AugmentationPool& pool, Rng& rng);

// K specs with pairwise-distinct kinds. Throws if k exceeds the pool.
std::vector<CorruptionSpec> sample_k_distinct(const AugmentationPool& pool, int k, Rng& rng);

// Severity table, levels 1..3. The seed is derived from (kind, level,
// instance_id) so repeated evaluations see identical noise.
CorruptionSpec eval_spec(CorruptionKind kind, int level, uint64_t instance_id = 0);

// CSV dump of the severity table in the documented layout.
std::string severity_table_csv();

}  // namespace roma
