#include "splitlab/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "splitlab/checkpoint.hpp"

namespace splitlab::cli {

bool write_ppm(const Tensor& image, const std::string& path) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw ShapeError("write_ppm expects a 3xHxW image, got " + image.shape_str());
  const int h = image.dim(1), w = image.dim(2);
  bool clamped = false;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<size_t>(h) * w * 3);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) {
        float v = image.at(c, i, j);
        if (v < 0.f || v > 1.f) {
          clamped = true;
          v = v < 0.f ? 0.f : 1.f;
        }
        out.push_back(static_cast<char>(static_cast<int>(std::lround(v * 255.0f))));
      }
  io::write_file(path, out.data(), out.size());
  if (clamped) std::fprintf(stderr, "warning: %s: out-of-range values clamped\n", path.c_str());
  return clamped;
}

Tensor read_ppm(const std::string& path) {
  const auto bytes = io::read_file(path);
  // header: P6\n<w> <h>\n255\n
  int w = 0, h = 0, maxv = 0, consumed = 0;
  if (std::sscanf(reinterpret_cast<const char*>(bytes.data()), "P6\n%d %d\n%d\n%n", &w, &h, &maxv,
                  &consumed) != 3 ||
      maxv != 255)
    throw DecodeError("not a P6 ppm: " + path, 0);
  const size_t need = static_cast<size_t>(consumed) + static_cast<size_t>(w) * h * 3;
  if (bytes.size() < need) throw DecodeError("ppm truncated: " + path, static_cast<long>(bytes.size()));
  Tensor img({3, h, w});
  size_t pos = static_cast<size_t>(consumed);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) img.at(c, i, j) = static_cast<float>(bytes[pos++]) / 255.f;
  return img;
}

std::vector<std::string> dump_images(const std::vector<Tensor>& images, const std::string& prefix) {
  std::vector<std::string> paths;
  for (size_t i = 0; i < images.size(); ++i) {
    std::string p = prefix + std::to_string(i) + ".ppm";
    write_ppm(images[i], p);
    paths.push_back(std::move(p));
  }
  return paths;
}

}  // namespace splitlab::cli
