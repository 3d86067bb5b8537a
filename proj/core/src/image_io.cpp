#include "unc/image_io.hpp"

#include <cmath>
#include <fstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

unsigned char quantize(double v) {
  const double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_header(std::ofstream& f, const char* tag, std::size_t w, std::size_t h) {
  f << tag << "\n" << w << " " << h << "\n255\n";
}

}  // namespace

void write_pgm(const std::string& path, std::size_t height, std::size_t width,
               std::span<const double> values) {
  if (values.size() != height * width) {
    throw ValueError("pgm: value count does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("pgm: cannot write " + path);
  write_header(f, "P5", width, height);
  for (double v : values) {
    const unsigned char b = quantize(v);
    f.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!f) throw IoError("pgm: short write to " + path);
}

void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               std::span<const double> chw_values) {
  if (chw_values.size() != 3 * height * width) {
    throw ValueError("ppm: value count does not match 3x" + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("ppm: cannot write " + path);
  write_header(f, "P6", width, height);
  const std::size_t plane = height * width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      const unsigned char b = quantize(chw_values[c * plane + p]);
      f.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (!f) throw IoError("ppm: short write to " + path);
}

void export_image(const Tensor& image, const std::string& path_stem) {
  if (image.ndim() != 4 || image.shape()[0] != 1) {
    throw ValueError("export_image: expects [1,C,H,W], got " + shape_to_string(image.shape()));
  }
  const std::size_t c = image.shape()[1], h = image.shape()[2], w = image.shape()[3];
  const std::size_t plane = h * w;
  if (c == 1) {
    write_pgm(path_stem + ".pgm", h, w, image.data().subspan(0, plane));
  } else if (c == 3) {
    write_ppm(path_stem + ".ppm", h, w, image.data());
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      write_pgm(path_stem + "_c" + std::to_string(ch) + ".pgm", h, w,
                image.data().subspan(ch * plane, plane));
    }
  }
}

}  // namespace unc
