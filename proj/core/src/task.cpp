// SPDX-License-Identifier: Apache-2.0
#include "roma/task.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "roma/rng.hpp"

namespace roma {

namespace vocab {

int shape_token(GlyphShape s) { return kShapeBase + static_cast<int>(s); }
int query_token(QueryKind q) { return kQueryBase + static_cast<int>(q); }

const char* token_name(int id) {
  static const char* names[kSize] = {
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      "circle", "square", "triangle", "cross",
      "count_shape", "count_all", "majority_shape",
      "<bos>", "<eos>"};
  if (id < 0 || id >= kSize) throw std::out_of_range("token id out of range");
  return names[id];
}

uint64_t vocab_hash() {
  uint64_t h = 14695981039346656037ULL;
  for (int i = 0; i < kSize; ++i) {
    for (const char* p = token_name(i); *p; ++p) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(*p));
      h *= 1099511628211ULL;
    }
    h ^= 0x7c;  // separator
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace vocab

std::vector<int> question_tokens(const Question& q) {
  const int marker = vocab::query_token(q.kind);
  if (q.kind == QueryKind::count_shape) return {marker, vocab::shape_token(q.arg)};
  return {marker, marker};
}

std::vector<int> derive_truth(const std::vector<Glyph>& glyphs, const Question& q) {
  switch (q.kind) {
    case QueryKind::count_shape: {
      int n = 0;
      for (const Glyph& g : glyphs)
        if (g.shape == q.arg) ++n;
      return {vocab::kDigit0 + n, vocab::kEos};
    }
    case QueryKind::count_all:
      return {vocab::kDigit0 + static_cast<int>(glyphs.size()), vocab::kEos};
    case QueryKind::majority_shape: {
      std::array<int, 4> counts{};
      for (const Glyph& g : glyphs) counts[static_cast<size_t>(g.shape)] += 1;
      int best = 0;
      for (int s = 1; s < 4; ++s)
        if (counts[static_cast<size_t>(s)] > counts[static_cast<size_t>(best)]) best = s;
      // ties resolve to the lowest shape id
      return {vocab::shape_token(static_cast<GlyphShape>(best)), vocab::kEos};
    }
  }
  throw std::invalid_argument("unknown query kind");
}

TaskInstance generate(uint64_t seed, const RenderConfig& cfg) {
  if (cfg.max_glyphs < cfg.min_glyphs || cfg.min_glyphs < 1 || cfg.max_glyphs > 9)
    throw std::invalid_argument("generate: glyph count range must be within [1,9]");
  if (cfg.radius_min < 4.0)
    throw std::invalid_argument("generate: glyph radius must be >= 4 px");
  Rng rng = Rng(seed).stream("task-instance");

  TaskInstance inst;
  inst.seed = seed;
  const int n_glyphs = rng.uniform_int(cfg.min_glyphs, cfg.max_glyphs);

  for (int attempt = 0; attempt < cfg.placement_attempts; ++attempt) {
    std::vector<Glyph> glyphs;
    bool ok = true;
    for (int i = 0; i < n_glyphs && ok; ++i) {
      bool placed = false;
      for (int tries = 0; tries < 200 && !placed; ++tries) {
        Glyph g;
        g.shape = static_cast<GlyphShape>(rng.below(4));
        g.radius = rng.uniform(cfg.radius_min, cfg.radius_max);
        const double margin = g.radius + 1.0;
        g.cx = rng.uniform(margin, cfg.image_size - margin);
        g.cy = rng.uniform(margin, cfg.image_size - margin);
        bool overlap = false;
        for (const Glyph& other : glyphs) {
          const double dx = g.cx - other.cx;
          const double dy = g.cy - other.cy;
          if (std::sqrt(dx * dx + dy * dy) <= g.radius + other.radius) {
            overlap = true;
            break;
          }
        }
        if (!overlap) {
          glyphs.push_back(g);
          placed = true;
        }
      }
      ok = placed;
    }
    if (ok) {
      inst.glyphs = std::move(glyphs);
      break;
    }
  }
  if (static_cast<int>(inst.glyphs.size()) != n_glyphs)
    throw std::runtime_error("generate: glyph placement failed after " +
                             std::to_string(cfg.placement_attempts) + " attempts");

  inst.question.kind = static_cast<QueryKind>(rng.below(3));
  if (inst.question.kind == QueryKind::count_shape)
    inst.question.arg = static_cast<GlyphShape>(rng.below(4));
  inst.truth = derive_truth(inst.glyphs, inst.question);
  return inst;
}

namespace {

bool point_in_glyph(const Glyph& g, double px, double py) {
  const double dx = px - g.cx;
  const double dy = py - g.cy;
  switch (g.shape) {
    case GlyphShape::circle:
      return dx * dx + dy * dy <= g.radius * g.radius;
    case GlyphShape::square: {
      const double half = 0.85 * g.radius;
      return std::abs(dx) <= half && std::abs(dy) <= half;
    }
    case GlyphShape::triangle: {
      // equilateral, circumradius r, apex up (image y grows downward)
      const double r = g.radius;
      if (dy < -r || dy > 0.5 * r) return false;
      const double half_width = (dy + r) / 1.5 * std::sqrt(3.0) / 2.0;
      return std::abs(dx) <= half_width;
    }
    case GlyphShape::cross: {
      const double bar = 0.35 * g.radius;
      const bool horizontal = std::abs(dy) <= bar && std::abs(dx) <= g.radius;
      const bool vertical = std::abs(dx) <= bar && std::abs(dy) <= g.radius;
      return horizontal || vertical;
    }
  }
  return false;
}

double pixel_coverage(const std::vector<Glyph>& glyphs, int x, int y, bool antialias) {
  // 2x2 supersampling at subpixel centers
  static constexpr double kOffsets[2] = {0.25, 0.75};
  if (!antialias) {
    const double px = x + 0.5, py = y + 0.5;
    for (const Glyph& g : glyphs)
      if (point_in_glyph(g, px, py)) return 1.0;
    return 0.0;
  }
  int hits = 0;
  for (const double oy : kOffsets)
    for (const double ox : kOffsets) {
      const double px = x + ox, py = y + oy;
      for (const Glyph& g : glyphs)
        if (point_in_glyph(g, px, py)) {
          ++hits;
          break;
        }
    }
  return hits / 4.0;
}

}  // namespace

ImageBuffer render(const TaskInstance& inst, const RenderConfig& cfg) {
  ImageBuffer img(cfg.image_size, cfg.image_size, 1, cfg.background);
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size; ++x) {
      const double cov = pixel_coverage(inst.glyphs, x, y, cfg.antialias);
      if (cov > 0.0)
        img.at(y, x) = cfg.background + cov * (cfg.foreground - cfg.background);
    }
  return img;
}

double reward(const TaskInstance& inst, const std::vector<int>& generated) {
  return generated == inst.truth ? 1.0 : 0.0;
}

uint64_t train_instance_seed(uint64_t master_seed, uint64_t index) {
  return kTrainSeedBase | (Rng::mix(master_seed, index) >> 1);
}

void check_eval_seed_range(uint64_t eval_seed_base, uint64_t count) {
  if (eval_seed_base >= kTrainSeedBase || eval_seed_base + count > kTrainSeedBase)
    throw std::invalid_argument(
        "eval seed range intersects the training seed range (top bit reserved)");
}

}  // namespace roma
