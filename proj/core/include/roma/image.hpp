// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace roma {

// Whether a buffer is an original render or the output of a degradation
// operator. The training loop refuses to sample rollouts from degraded views.
enum class Provenance : uint8_t { clean, degraded };

// H x W x C raster, row-major, values in [0, 1].
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;
  Provenance provenance = Provenance::clean;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, double fill = 0.0);

  int64_t pixel_count() const { return static_cast<int64_t>(height) * width; }
  int64_t numel() const { return pixel_count() * channels; }

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool in_unit_range() const;
  bool same_dims(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Binary PGM (P5) for 1 channel, PPM (P6) for 3, maxval 255.
// Writing rounds to nearest; reading maps v/255 back to [0,1].
void write_pnm(const ImageBuffer& img, const std::string& path);
ImageBuffer read_pnm(const std::string& path);

}  // namespace roma
