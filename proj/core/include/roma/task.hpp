// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roma/image.hpp"

namespace roma {

enum class GlyphShape { circle, square, triangle, cross };
enum class QueryKind { count_shape, count_all, majority_shape };

// Fixed 19-token vocabulary: digits, shape names, query markers, BOS, EOS.
// PAD aliases EOS; nothing in the pipeline pads, so the alias is vestigial.
namespace vocab {
constexpr int kDigit0 = 0;  // digits occupy ids 0..9
constexpr int kShapeBase = 10;
constexpr int kQueryBase = 14;
constexpr int kBos = 17;
constexpr int kEos = 18;
constexpr int kPad = kEos;
constexpr int kSize = 19;

int shape_token(GlyphShape s);
int query_token(QueryKind q);
const char* token_name(int id);
// Stable hash over the ordered token names; checkpoints embed it so a loader
// can reject a vocabulary mismatch.
uint64_t vocab_hash();
}  // namespace vocab

struct Glyph {
  GlyphShape shape;
  double cx, cy;
  double radius;
};

struct Question {
  QueryKind kind;
  GlyphShape arg = GlyphShape::circle;  // used by count_shape only
};

// Always two tokens: [query marker, argument] where the argument is the shape
// token for count_shape and the query marker repeated otherwise.
std::vector<int> question_tokens(const Question& q);

struct TaskInstance {
  uint64_t seed = 0;
  std::vector<Glyph> glyphs;
  Question question;
  std::vector<int> truth;  // answer tokens, EOS-terminated
};

struct RenderConfig {
  int image_size = 48;
  int min_glyphs = 1;
  int max_glyphs = 9;
  double radius_min = 4.0;
  double radius_max = 7.0;
  bool antialias = true;  // 2x2 supersampled coverage
  double background = 0.1;
  double foreground = 0.9;
  int placement_attempts = 1000;
};

// Deterministic instance from a seed: glyph layout, uniformly chosen
// question, truth derived from the glyph list.
TaskInstance generate(uint64_t seed, const RenderConfig& cfg = {});

// Recompute the answer tokens from glyphs + question.
std::vector<int> derive_truth(const std::vector<Glyph>& glyphs, const Question& q);

ImageBuffer render(const TaskInstance& inst, const RenderConfig& cfg = {});

// Exact-match reward: 1.0 iff the generated tokens equal the truth tokens
// (EOS included), else 0.0.
double reward(const TaskInstance& inst, const std::vector<int>& generated);

// Training and evaluation draw instance seeds from disjoint halves of the
// seed space (top bit set for training).
constexpr uint64_t kTrainSeedBase = 1ULL << 63;
uint64_t train_instance_seed(uint64_t master_seed, uint64_t index);
void check_eval_seed_range(uint64_t eval_seed_base, uint64_t count);

}  // namespace roma
