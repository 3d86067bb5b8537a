#include "unc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "unc/errors.hpp"
#include "unc/rng.hpp"

namespace unc {

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

// 7x5 glyph bitmaps for the digit renderer.
const std::array<const char*, 10> kDigitFont = {
    "01110"
    "10001"
    "10011"
    "10101"
    "11001"
    "10001"
    "01110",  // 0
    "00100"
    "01100"
    "00100"
    "00100"
    "00100"
    "00100"
    "01110",  // 1
    "01110"
    "10001"
    "00001"
    "00010"
    "00100"
    "01000"
    "11111",  // 2
    "11111"
    "00010"
    "00100"
    "00010"
    "00001"
    "10001"
    "01110",  // 3
    "00010"
    "00110"
    "01010"
    "10010"
    "11111"
    "00010"
    "00010",  // 4
    "11111"
    "10000"
    "11110"
    "00001"
    "00001"
    "10001"
    "01110",  // 5
    "00110"
    "01000"
    "10000"
    "11110"
    "10001"
    "10001"
    "01110",  // 6
    "11111"
    "00001"
    "00010"
    "00100"
    "01000"
    "01000"
    "01000",  // 7
    "01110"
    "10001"
    "10001"
    "01110"
    "10001"
    "10001"
    "01110",  // 8
    "01110"
    "10001"
    "10001"
    "01111"
    "00001"
    "00010"
    "01100",  // 9
};

double glyph_sample(int digit, double u, double v) {
  // Bilinear sample of the 7x5 bitmap at (u, v) in [0,1]^2.
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return 0.0;
  const char* bits = kDigitFont[digit];
  const double x = u * 4.0;
  const double y = v * 6.0;
  const int x0 = std::min(static_cast<int>(x), 3);
  const int y0 = std::min(static_cast<int>(y), 5);
  const double fx = x - x0;
  const double fy = y - y0;
  auto px = [&](int yy, int xx) { return bits[yy * 5 + xx] == '1' ? 1.0 : 0.0; };
  return (1 - fx) * (1 - fy) * px(y0, x0) + fx * (1 - fy) * px(y0, x0 + 1) +
         (1 - fx) * fy * px(y0 + 1, x0) + fx * fy * px(y0 + 1, x0 + 1);
}

Dataset make_empty(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                   std::size_t k, std::string provenance) {
  Dataset d;
  d.count = n;
  d.channels = c;
  d.height = h;
  d.width = w;
  d.class_count = k;
  d.images.assign(n * c * h * w, 0.0);
  d.labels.assign(n, 0);
  d.split_tag = "full";
  d.provenance = std::move(provenance);
  return d;
}

// Labels cover all classes within +-1 count: round-robin order, then a
// seed-derived shuffle.
void assign_balanced_labels(Dataset& d, Rng& rng) {
  for (std::size_t i = 0; i < d.count; ++i) d.labels[i] = static_cast<int>(i % d.class_count);
  for (std::size_t i = d.count; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(d.labels[i - 1], d.labels[j]);
  }
}

Dataset synth_gaussian_blobs(std::size_t n, std::uint64_t seed) {
  const std::size_t k = 4, h = 8, w = 8;
  Dataset d = make_empty(n, 1, h, w, k, "synth:gaussian_blobs:" + std::to_string(seed));
  Rng rng(Rng::mix(seed, 0xb10b5));
  std::vector<double> means(k * h * w);
  for (auto& m : means) m = rng.uniform(0.2, 0.8);
  assign_balanced_labels(d, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double* mu = means.data() + d.labels[i] * h * w;
    double* img = d.images.data() + i * h * w;
    for (std::size_t p = 0; p < h * w; ++p) {
      img[p] = std::clamp(mu[p] + rng.normal(0.0, 0.05), 0.0, 1.0);
    }
  }
  return d;
}

Dataset synth_two_moons(std::size_t n, std::uint64_t seed) {
  const std::size_t h = 8, w = 8;
  Dataset d = make_empty(n, 1, h, w, 2, "synth:two_moons_images:" + std::to_string(seed));
  Rng rng(Rng::mix(seed, 0x300175));
  assign_balanced_labels(d, rng);
  const double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, pi);
    double px, py;
    if (d.labels[i] == 0) {
      px = std::cos(t);
      py = std::sin(t);
    } else {
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    px += rng.normal(0.0, 0.06);
    py += rng.normal(0.0, 0.06);
    // Map the moons' bounding box to [0,1]^2 and render a bump.
    const double ux = (px + 1.3) / 3.6;
    const double uy = (py + 1.1) / 2.8;
    double* img = d.images.data() + i * h * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double cx = (c + 0.5) / w;
        const double cy = (r + 0.5) / h;
        const double dist2 = (cx - ux) * (cx - ux) + (cy - uy) * (cy - uy);
        img[r * w + c] = std::clamp(std::exp(-dist2 / (2 * 0.12 * 0.12)), 0.0, 1.0);
      }
    }
  }
  return d;
}

Dataset synth_colored_shapes(std::size_t n, std::uint64_t seed) {
  const std::size_t k = 3, h = 16, w = 16;
  Dataset d = make_empty(n, 3, h, w, k, "synth:colored_shapes:" + std::to_string(seed));
  Rng rng(Rng::mix(seed, 0x5aa9ed));
  assign_balanced_labels(d, rng);
  // Class identity is carried by color; the shape kind is uninformative.
  const double base[3][3] = {{0.62, 0.32, 0.32}, {0.32, 0.62, 0.32}, {0.32, 0.32, 0.62}};
  for (std::size_t i = 0; i < n; ++i) {
    double color[3];
    for (int c = 0; c < 3; ++c) {
      color[c] = std::clamp(base[d.labels[i]][c] + rng.uniform(-0.20, 0.20), 0.02, 0.98);
    }
    const int shape = static_cast<int>(rng.uniform_int(3));
    const double cx = rng.uniform(0.3, 0.7) * w;
    const double cy = rng.uniform(0.3, 0.7) * h;
    const double radius = rng.uniform(0.22, 0.34) * w;
    double* img = d.images.data() + i * 3 * h * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double dx = c + 0.5 - cx;
        const double dy = r + 0.5 - cy;
        bool inside = false;
        switch (shape) {
          case 0: inside = std::max(std::abs(dx), std::abs(dy)) <= radius; break;
          case 1: inside = dx * dx + dy * dy <= radius * radius; break;
          default:
            inside = std::abs(std::abs(dx) - std::abs(dy)) <= radius * 0.35 &&
                     std::max(std::abs(dx), std::abs(dy)) <= radius;
        }
        for (int ch = 0; ch < 3; ++ch) {
          const double bg = 0.10 + rng.normal(0.0, 0.015);
          const double v = inside ? color[ch] + rng.normal(0.0, 0.01) : bg;
          img[ch * h * w + r * w + c] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return d;
}

Dataset synth_digits(std::size_t n, std::uint64_t seed) {
  const std::size_t k = 10, h = 28, w = 28;
  Dataset d = make_empty(n, 1, h, w, k, "synth:digits:" + std::to_string(seed));
  Rng rng(Rng::mix(seed, 0xd1617));
  assign_balanced_labels(d, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = d.labels[i];
    const double scale = rng.uniform(0.7, 1.25);
    const double angle = rng.uniform(-0.35, 0.35);
    const double shift_x = rng.uniform(-3.5, 3.5);
    const double shift_y = rng.uniform(-3.5, 3.5);
    const double ink = rng.uniform(0.55, 1.0);
    const double shear = rng.uniform(-0.25, 0.25);
    // Stroke weight: raise the bilinear sample to a per-image power.
    const double gamma = rng.uniform(0.5, 1.8);
    const double ca = std::cos(angle), sa = std::sin(angle);
    // Glyph box ~ 18x13 pixels centered in the 28x28 frame.
    const double gw = 13.0 * scale, gh = 18.0 * scale;
    double* img = d.images.data() + i * h * w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        // Rotate and shear around the image center, then map into glyph
        // coordinates.
        const double dx = (c + 0.5 - w / 2.0) - shift_x;
        const double dy = (r + 0.5 - h / 2.0) - shift_y;
        const double rx = ca * dx + sa * dy + shear * dy;
        const double ry = -sa * dx + ca * dy;
        const double u = rx / gw + 0.5;
        const double v = ry / gh + 0.5;
        const double g = std::pow(glyph_sample(digit, u, v), gamma);
        const double noisy = ink * g + rng.normal(0.0, 0.09);
        img[r * w + c] = std::clamp(noisy, 0.0, 1.0);
      }
    }
  }
  return d;
}

}  // namespace

Tensor Dataset::image(std::size_t i) const {
  if (i >= count) throw ValueError("dataset: image index out of range");
  std::vector<double> v(images.begin() + i * image_size(),
                        images.begin() + (i + 1) * image_size());
  return Tensor::from_vector({1, channels, height, width}, std::move(v));
}

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  std::vector<double> v(indices.size() * image_size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= count) throw ValueError("dataset: batch index out of range");
    std::copy_n(images.data() + indices[b] * image_size(), image_size(),
                v.data() + b * image_size());
  }
  return Tensor::from_vector({indices.size(), channels, height, width}, std::move(v));
}

std::vector<int> Dataset::batch_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) out[b] = labels[indices[b]];
  return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end, std::string tag) const {
  if (begin > end || end > count) throw ValueError("dataset: bad slice range");
  Dataset out;
  out.count = end - begin;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.class_count = class_count;
  out.images.assign(images.begin() + begin * image_size(), images.begin() + end * image_size());
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  out.split_tag = std::move(tag);
  out.provenance = provenance;
  return out;
}

void Dataset::validate() const {
  if (count == 0) throw ValueError("dataset: empty");
  if (images.size() != count * image_size() || labels.size() != count) {
    throw ValueError("dataset: image/label count mismatch");
  }
  for (double v : images) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValueError("dataset: pixel value outside [0,1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw ValueError("dataset: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(class_count) + ")");
    }
  }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("idx: cannot open " + images_path);
  const std::uint32_t img_magic = read_be_u32(imgs, images_path);
  if (img_magic != kImagesMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", img_magic);
    throw IoError("idx: bad image magic " + std::string(buf) + " in " + images_path);
  }
  const std::uint32_t n = read_be_u32(imgs, images_path);
  const std::uint32_t rows = read_be_u32(imgs, images_path);
  const std::uint32_t cols = read_be_u32(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("idx: cannot open " + labels_path);
  const std::uint32_t lab_magic = read_be_u32(labs, labels_path);
  if (lab_magic != kLabelsMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", lab_magic);
    throw IoError("idx: bad label magic " + std::string(buf) + " in " + labels_path);
  }
  const std::uint32_t n_labels = read_be_u32(labs, labels_path);
  if (n_labels != n) {
    throw IoError("idx: " + std::to_string(n) + " images in " + images_path + " but " +
                  std::to_string(n_labels) + " labels in " + labels_path);
  }

  std::vector<unsigned char> pixel_bytes(static_cast<std::size_t>(n) * rows * cols);
  imgs.read(reinterpret_cast<char*>(pixel_bytes.data()), pixel_bytes.size());
  if (imgs.gcount() != static_cast<std::streamsize>(pixel_bytes.size())) {
    throw IoError("idx: truncated image payload in " + images_path);
  }
  std::vector<unsigned char> label_bytes(n);
  labs.read(reinterpret_cast<char*>(label_bytes.data()), label_bytes.size());
  if (labs.gcount() != static_cast<std::streamsize>(label_bytes.size())) {
    throw IoError("idx: truncated label payload in " + labels_path);
  }

  Dataset d = make_empty(n, 1, rows, cols, 0, "idx:" + images_path);
  for (std::size_t i = 0; i < pixel_bytes.size(); ++i) d.images[i] = pixel_bytes[i] / 255.0;
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = label_bytes[i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.class_count = static_cast<std::size_t>(max_label) + 1;
  d.validate();
  return d;
}

void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path) {
  if (data.channels != 1) {
    throw IoError("idx: export supports single-channel data only, got " +
                  std::to_string(data.channels) + " channels");
  }
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("idx: cannot write " + images_path);
  write_be_u32(imgs, kImagesMagic);
  write_be_u32(imgs, static_cast<std::uint32_t>(data.count));
  write_be_u32(imgs, static_cast<std::uint32_t>(data.height));
  write_be_u32(imgs, static_cast<std::uint32_t>(data.width));
  std::vector<unsigned char> bytes(data.images.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(data.images[i], 0.0, 1.0) * 255.0));
  }
  imgs.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!imgs) throw IoError("idx: short write to " + images_path);

  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("idx: cannot write " + labels_path);
  write_be_u32(labs, kLabelsMagic);
  write_be_u32(labs, static_cast<std::uint32_t>(data.count));
  std::vector<unsigned char> lbytes(data.count);
  for (std::size_t i = 0; i < data.count; ++i) lbytes[i] = static_cast<unsigned char>(data.labels[i]);
  labs.write(reinterpret_cast<const char*>(lbytes.data()), lbytes.size());
  if (!labs) throw IoError("idx: short write to " + labels_path);
}

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "gaussian_blobs") return SynthKind::gaussian_blobs;
  if (name == "two_moons_images") return SynthKind::two_moons_images;
  if (name == "colored_shapes") return SynthKind::colored_shapes;
  if (name == "digits") return SynthKind::digits;
  throw ValueError("synth_dataset: unknown kind '" + name + "'");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::gaussian_blobs: return "gaussian_blobs";
    case SynthKind::two_moons_images: return "two_moons_images";
    case SynthKind::colored_shapes: return "colored_shapes";
    case SynthKind::digits: return "digits";
  }
  return "?";
}

Dataset synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValueError("synth_dataset: n must be >= 1");
  switch (kind) {
    case SynthKind::gaussian_blobs: return synth_gaussian_blobs(n, seed);
    case SynthKind::two_moons_images: return synth_two_moons(n, seed);
    case SynthKind::colored_shapes: return synth_colored_shapes(n, seed);
    case SynthKind::digits: return synth_digits(n, seed);
  }
  throw ValueError("synth_dataset: unknown kind");
}

}  // namespace unc
