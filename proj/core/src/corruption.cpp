// SPDX-License-Identifier: Apache-2.0
#include "roma/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace roma {
namespace {

// Annex-K luminance quantization table (IJG baseline).
constexpr int kJpegLumaTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

ImageBuffer degraded_like(const ImageBuffer& src) {
  ImageBuffer out(src.height, src.width, src.channels);
  out.provenance = Provenance::degraded;
  return out;
}

ImageBuffer apply_gaussian_noise(const ImageBuffer& img, double sigma, uint64_t seed) {
  ImageBuffer out = img;
  out.provenance = Provenance::degraded;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.data) v = clamp01(v + sigma * rng.gaussian());
  return out;
}

ImageBuffer apply_speckle(const ImageBuffer& img, double sigma, uint64_t seed) {
  ImageBuffer out = img;
  out.provenance = Provenance::degraded;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.data) v = clamp01(v * (1.0 + sigma * rng.gaussian()));
  return out;
}

ImageBuffer apply_salt_pepper(const ImageBuffer& img, double p, uint64_t seed) {
  ImageBuffer out = img;
  out.provenance = Provenance::degraded;
  Rng rng(seed);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (rng.uniform01() < p) {
        const double v = rng.uniform01() < 0.5 ? 1.0 : 0.0;
        for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = v;
      }
    }
  return out;
}

ImageBuffer apply_posterize(const ImageBuffer& img, int bits) {
  ImageBuffer out = img;
  out.provenance = Provenance::degraded;
  const double levels = std::pow(2.0, bits) - 1.0;
  for (double& v : out.data) v = std::round(v * levels) / levels;
  return out;
}

// Separable Gaussian, sigma = radius, half-width ceil(3 sigma), kernel
// renormalized, clamp-to-edge.
ImageBuffer apply_gaussian_blur(const ImageBuffer& img, double radius) {
  ImageBuffer out = img;
  out.provenance = Provenance::degraded;
  if (radius == 0.0) return out;
  const int half = static_cast<int>(std::ceil(3.0 * radius));
  std::vector<double> kernel(static_cast<size_t>(2 * half + 1));
  double ksum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (radius * radius));
    kernel[static_cast<size_t>(i + half)] = w;
    ksum += w;
  }
  for (double& w : kernel) w /= ksum;

  ImageBuffer tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int xx = std::clamp(x + i, 0, img.width - 1);
          s += kernel[static_cast<size_t>(i + half)] * img.at(y, xx, c);
        }
        tmp.at(y, x, c) = s;
      }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int yy = std::clamp(y + i, 0, img.height - 1);
          s += kernel[static_cast<size_t>(i + half)] * tmp.at(yy, x, c);
        }
        out.at(y, x, c) = clamp01(s);
      }
  return out;
}

ImageBuffer apply_motion_blur(const ImageBuffer& img, int k) {
  ImageBuffer out = degraded_like(img);
  const int half = k / 2;
  const double inv = 1.0 / static_cast<double>(k);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int xx = std::clamp(x + i, 0, img.width - 1);
          s += img.at(y, xx, c);
        }
        out.at(y, x, c) = clamp01(s * inv);
      }
  return out;
}

// Pixel-center bilinear sampling, edges clamped.
ImageBuffer bilinear_resize(const ImageBuffer& img, int out_h, int out_w) {
  ImageBuffer out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

ImageBuffer apply_resolution_scale(const ImageBuffer& img, double f) {
  const int h = std::max<int>(1, static_cast<int>(std::floor(f * img.height)));
  const int w = std::max<int>(1, static_cast<int>(std::floor(f * img.width)));
  ImageBuffer small = bilinear_resize(img, h, w);
  ImageBuffer out = bilinear_resize(small, img.height, img.width);
  out.provenance = Provenance::degraded;
  for (double& v : out.data) v = clamp01(v);
  return out;
}

// Box-average downscale to (ceil(fH), ceil(fW)) and nearest-neighbor upscale.
// Both directions use the same cell partition c(y) = floor(y*h'/H), which
// makes the operator idempotent and gives exact constant blocks.
ImageBuffer apply_pixelate(const ImageBuffer& img, double f) {
  const int h = std::max<int>(1, static_cast<int>(std::ceil(f * img.height)));
  const int w = std::max<int>(1, static_cast<int>(std::ceil(f * img.width)));
  auto cell_of = [](int v, int cells, int extent) {
    return std::min(cells - 1, static_cast<int>((static_cast<int64_t>(v) * cells) / extent));
  };
  // cell mean = first value + mean of deviations; exact for constant blocks,
  // which makes a second application a no-op
  const size_t n_values = static_cast<size_t>(h) * w * img.channels;
  std::vector<double> base(n_values, 0.0);
  std::vector<double> dev_sum(n_values, 0.0);
  std::vector<int> counts(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < img.height; ++y) {
    const int cy = cell_of(y, h, img.height);
    for (int x = 0; x < img.width; ++x) {
      const int cx = cell_of(x, w, img.width);
      const size_t cell = static_cast<size_t>(cy) * w + cx;
      const bool first = counts[cell] == 0;
      counts[cell] += 1;
      for (int c = 0; c < img.channels; ++c) {
        const size_t slot = cell * img.channels + c;
        if (first)
          base[slot] = img.at(y, x, c);
        else
          dev_sum[slot] += img.at(y, x, c) - base[slot];
      }
    }
  }
  ImageBuffer out = degraded_like(img);
  for (int y = 0; y < img.height; ++y) {
    const int cy = cell_of(y, h, img.height);
    for (int x = 0; x < img.width; ++x) {
      const int cx = cell_of(x, w, img.width);
      const size_t cell = static_cast<size_t>(cy) * w + cx;
      for (int c = 0; c < img.channels; ++c) {
        const size_t slot = cell * img.channels + c;
        out.at(y, x, c) = clamp01(base[slot] + dev_sum[slot] / counts[cell]);
      }
    }
  }
  return out;
}

struct DctTables {
  double cosine[8][8];  // cosine[x][u] = cos((2x+1) u pi / 16)
  double scale[8];      // C(u): 1/sqrt(2) for u = 0, else 1
  DctTables() {
    for (int x = 0; x < 8; ++x)
      for (int u = 0; u < 8; ++u)
        cosine[x][u] = std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
    scale[0] = 1.0 / std::sqrt(2.0);
    for (int u = 1; u < 8; ++u) scale[u] = 1.0;
  }
};

const DctTables& dct_tables() {
  static const DctTables t;
  return t;
}

// Block DCT quantization with the IJG quality scaling. Entropy coding is
// lossless, so the artifact is fully determined here.
ImageBuffer apply_jpeg(const ImageBuffer& img, int quality) {
  const DctTables& T = dct_tables();
  const long scale_factor = quality < 50 ? 5000 / quality : 200 - 2L * quality;
  int qtable[64];
  for (int i = 0; i < 64; ++i) {
    const long q = (kJpegLumaTable[i] * scale_factor + 50) / 100;
    qtable[i] = static_cast<int>(std::clamp(q, 1L, 255L));
  }

  const int bh = (img.height + 7) / 8 * 8;
  const int bw = (img.width + 7) / 8 * 8;
  ImageBuffer out = degraded_like(img);
  std::vector<double> plane(static_cast<size_t>(bh) * bw);
  for (int c = 0; c < img.channels; ++c) {
    // shift to [-128, 127] on a 0-255 scale, pad by edge replication
    for (int y = 0; y < bh; ++y) {
      const int sy = std::min(y, img.height - 1);
      for (int x = 0; x < bw; ++x) {
        const int sx = std::min(x, img.width - 1);
        plane[static_cast<size_t>(y) * bw + x] = img.at(sy, sx, c) * 255.0 - 128.0;
      }
    }
    for (int by = 0; by < bh; by += 8)
      for (int bx = 0; bx < bw; bx += 8) {
        double block[8][8], coeff[8][8];
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            block[y][x] = plane[static_cast<size_t>(by + y) * bw + (bx + x)];
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x)
                s += block[y][x] * T.cosine[y][u] * T.cosine[x][v];
            const double f = 0.25 * T.scale[u] * T.scale[v] * s;
            const int q = qtable[u * 8 + v];
            coeff[u][v] = static_cast<double>(std::lround(f / q)) * q;
          }
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u)
              for (int v = 0; v < 8; ++v)
                s += T.scale[u] * T.scale[v] * coeff[u][v] * T.cosine[y][u] * T.cosine[x][v];
            plane[static_cast<size_t>(by + y) * bw + (bx + x)] = 0.25 * s;
          }
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(y, x, c) = clamp01((plane[static_cast<size_t>(y) * bw + x] + 128.0) / 255.0);
  }
  return out;
}

int int_param(const CorruptionSpec& spec) {
  return static_cast<int>(std::lround(spec.param));
}

}  // namespace

const char* kind_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::gaussian_blur: return "gaussian_blur";
    case CorruptionKind::jpeg_compression: return "jpeg_compression";
    case CorruptionKind::resolution_scale: return "resolution_scale";
    case CorruptionKind::motion_blur: return "motion_blur";
    case CorruptionKind::salt_pepper: return "salt_pepper";
    case CorruptionKind::speckle: return "speckle";
    case CorruptionKind::posterize: return "posterize";
    case CorruptionKind::pixelate: return "pixelate";
  }
  throw std::invalid_argument("unknown corruption kind");
}

CorruptionKind kind_from_name(const std::string& name) {
  for (const CorruptionKind k : kSeenKinds)
    if (name == kind_name(k)) return k;
  for (const CorruptionKind k : kUnseenKinds)
    if (name == kind_name(k)) return k;
  throw std::invalid_argument("unknown corruption kind: " + name);
}

void validate_spec(const CorruptionSpec& spec) {
  const double p = spec.param;
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
    case CorruptionKind::speckle:
      if (p < 0) throw std::invalid_argument("sigma must be >= 0");
      return;
    case CorruptionKind::gaussian_blur:
      if (p < 0) throw std::invalid_argument("radius must be >= 0");
      return;
    case CorruptionKind::jpeg_compression:
      if (p < 1 || p > 100) throw std::invalid_argument("jpeg quality must be in [1,100]");
      return;
    case CorruptionKind::resolution_scale:
    case CorruptionKind::pixelate:
      if (!(p > 0 && p <= 1)) throw std::invalid_argument("scale must be in (0,1]");
      return;
    case CorruptionKind::motion_blur: {
      const int k = static_cast<int>(std::lround(p));
      if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel size must be odd and >= 1");
      return;
    }
    case CorruptionKind::salt_pepper:
      if (!(p >= 0 && p <= 1)) throw std::invalid_argument("probability must be in [0,1]");
      return;
    case CorruptionKind::posterize: {
      const int b = static_cast<int>(std::lround(p));
      if (b < 1 || b > 8) throw std::invalid_argument("bit depth must be in [1,8]");
      return;
    }
  }
  throw std::invalid_argument("unknown corruption kind");
}

ImageBuffer apply(const ImageBuffer& img, const CorruptionSpec& spec) {
  if (img.numel() == 0) throw std::invalid_argument("apply: zero-sized image");
  validate_spec(spec);
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
      return apply_gaussian_noise(img, spec.param, spec.seed);
    case CorruptionKind::gaussian_blur:
      return apply_gaussian_blur(img, spec.param);
    case CorruptionKind::jpeg_compression:
      return apply_jpeg(img, int_param(spec));
    case CorruptionKind::resolution_scale:
      return apply_resolution_scale(img, spec.param);
    case CorruptionKind::motion_blur:
      return apply_motion_blur(img, int_param(spec));
    case CorruptionKind::salt_pepper:
      return apply_salt_pepper(img, spec.param, spec.seed);
    case CorruptionKind::speckle:
      return apply_speckle(img, spec.param, spec.seed);
    case CorruptionKind::posterize:
      return apply_posterize(img, int_param(spec));
    case CorruptionKind::pixelate:
      return apply_pixelate(img, spec.param);
  }
  throw std::invalid_argument("unknown corruption kind");
}

AugmentationPool AugmentationPool::seen() {
  return AugmentationPool{{kSeenKinds.begin(), kSeenKinds.end()}};
}

namespace {

void require_seen(CorruptionKind kind) {
  if (std::find(kSeenKinds.begin(), kSeenKinds.end(), kind) == kSeenKinds.end())
    throw std::invalid_argument(std::string("no training distribution for held-out kind ") +
                                kind_name(kind));
}

double sample_training_param(CorruptionKind kind, Rng& rng) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return 0.05;
    case CorruptionKind::gaussian_blur: return rng.uniform(0.5, 2.0);
    case CorruptionKind::jpeg_compression: return static_cast<double>(rng.uniform_int(30, 85));
    case CorruptionKind::resolution_scale: return rng.uniform(0.3, 0.7);
    default: require_seen(kind); return 0.0;
  }
}

}  // namespace

CorruptionSpec sample_training_spec(const AugmentationPool& pool, Rng& rng) {
  if (pool.kinds.empty()) throw std::invalid_argument("empty augmentation pool");
  for (const CorruptionKind k : pool.kinds) require_seen(k);
  const CorruptionKind kind = pool.kinds[rng.below(pool.kinds.size())];
  CorruptionSpec spec;
  spec.kind = kind;
  spec.param = sample_training_param(kind, rng);
  spec.seed = rng.next_u64();
  return spec;
}

std::vector<CorruptionSpec> sample_k_distinct(const AugmentationPool& pool, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample_k_distinct: k must be >= 1");
  if (static_cast<size_t>(k) > pool.kinds.size())
    throw std::invalid_argument("sample_k_distinct: k exceeds pool size");
  std::vector<CorruptionKind> remaining = pool.kinds;
  std::vector<CorruptionSpec> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    const size_t pick = rng.below(remaining.size());
    const CorruptionKind kind = remaining[pick];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    CorruptionSpec spec;
    spec.kind = kind;
    spec.param = sample_training_param(kind, rng);
    spec.seed = rng.next_u64();
    out.push_back(spec);
  }
  return out;
}

CorruptionSpec eval_spec(CorruptionKind kind, int level, uint64_t instance_id) {
  if (level < 1 || level > 3) throw std::invalid_argument("severity level must be 1, 2 or 3");
  static constexpr double kTable[9][3] = {
      {0.03, 0.06, 0.12},  // gaussian_noise sigma
      {1.0, 2.0, 3.5},     // gaussian_blur radius
      {65, 40, 15},        // jpeg quality
      {0.6, 0.4, 0.2},     // resolution scale
      {5, 15, 25},         // motion_blur kernel
      {0.02, 0.05, 0.10},  // salt_pepper probability
      {0.06, 0.12, 0.25},  // speckle sigma
      {6, 4, 2},           // posterize bits
      {0.5, 0.25, 0.12},   // pixelate scale
  };
  CorruptionSpec spec;
  spec.kind = kind;
  spec.param = kTable[static_cast<int>(kind)][level - 1];
  spec.seed = Rng::mix(Rng::mix(static_cast<uint64_t>(kind) + 1,
                                static_cast<uint64_t>(level)),
                       instance_id);
  return spec;
}

std::string severity_table_csv() {
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  std::ostringstream os;
  os << "degradation,parameter,training,level1,level2,level3\n";
  const struct {
    CorruptionKind kind;
    const char* param;
    const char* training;
  } rows[] = {
      {CorruptionKind::gaussian_noise, "sigma", "0.05"},
      {CorruptionKind::gaussian_blur, "radius", "U(0.5;2.0)"},
      {CorruptionKind::jpeg_compression, "quality", "U{30..85}"},
      {CorruptionKind::resolution_scale, "scale", "U(0.3;0.7)"},
      {CorruptionKind::motion_blur, "kernel", "held-out"},
      {CorruptionKind::salt_pepper, "probability", "held-out"},
      {CorruptionKind::speckle, "sigma", "held-out"},
      {CorruptionKind::posterize, "bits", "held-out"},
      {CorruptionKind::pixelate, "scale", "held-out"},
  };
  for (const auto& r : rows) {
    os << kind_name(r.kind) << ',' << r.param << ',' << r.training;
    for (int level = 1; level <= 3; ++level) os << ',' << fmt(eval_spec(r.kind, level).param);
    os << '\n';
  }
  return os.str();
}

}  // namespace roma
