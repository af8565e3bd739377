// SPDX-License-Identifier: Apache-2.0
#include "roma/image.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace roma {

ImageBuffer::ImageBuffer(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3))
    throw std::invalid_argument("ImageBuffer: bad dimensions");
  data.assign(static_cast<size_t>(numel()), fill);
}

bool ImageBuffer::in_unit_range() const {
  for (const double v : data)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

void write_pnm(const ImageBuffer& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << (img.channels == 1 ? "P5" : "P6") << "\n"
     << img.width << " " << img.height << "\n255\n";
  for (const double v : img.data) {
    const int byte = static_cast<int>(std::lround(v * 255.0));
    os.put(static_cast<char>(std::clamp(byte, 0, 255)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

ImageBuffer read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("unsupported PNM magic in " + path);
  auto next_int = [&is, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      const int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
    int v = 0;
    if (!(is >> v)) throw std::runtime_error("malformed PNM header in " + path);
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("PNM maxval must be 255 in " + path);
  is.get();  // single whitespace after maxval
  ImageBuffer img(h, w, magic == "P5" ? 1 : 3);
  for (double& v : img.data) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("PNM truncated: " + path);
    v = static_cast<double>(c) / 255.0;
  }
  return img;
}

}  // namespace roma
