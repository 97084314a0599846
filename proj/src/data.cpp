#include "zipfls/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace zipfls {
namespace {

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Bilinearly upsamples a grid x grid x 3 field to 32x32x3. Grid nodes sit at
// the corners of the image so interpolation covers every pixel.
void upsample_grid(const std::vector<double>& grid, int g, std::array<double, kImagePixels>& out) {
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < kImageSide; ++y) {
      const double fy = static_cast<double>(y) / (kImageSide - 1) * (g - 1);
      const int y0 = std::min(static_cast<int>(fy), g - 2);
      const double ty = fy - y0;
      for (int x = 0; x < kImageSide; ++x) {
        const double fx = static_cast<double>(x) / (kImageSide - 1) * (g - 1);
        const int x0 = std::min(static_cast<int>(fx), g - 2);
        const double tx = fx - x0;
        auto node = [&](int yy, int xx) {
          return grid[(static_cast<std::size_t>(c) * g + yy) * g + xx];
        };
        const double v = (1 - ty) * ((1 - tx) * node(y0, x0) + tx * node(y0, x0 + 1)) +
                         ty * ((1 - tx) * node(y0 + 1, x0) + tx * node(y0 + 1, x0 + 1));
        out[(static_cast<std::size_t>(c) * kImageSide + y) * kImageSide + x] = v;
      }
    }
  }
}

std::vector<double> random_grid(int g, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<double> grid(static_cast<std::size_t>(3) * g * g);
  for (double& v : grid) v = u(rng);
  return grid;
}

int reflect_index(int i) {
  if (i < 0) return -i;
  if (i >= kImageSide) return 2 * (kImageSide - 1) - i;
  return i;
}

}  // namespace

Dataset parse_cifar_records(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw std::runtime_error("corrupt CIFAR file: size not a multiple of 3074 bytes");
  }
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  Dataset out;
  out.num_classes = 100;
  out.images.resize(count);
  out.fine.resize(count);
  out.coarse.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] >= 20) throw std::runtime_error("corrupt CIFAR record: coarse label out of range");
    if (rec[1] >= 100) throw std::runtime_error("corrupt CIFAR record: fine label out of range");
    out.coarse[i] = rec[0];
    out.fine[i] = rec[1];
    std::copy(rec + 2, rec + kCifarRecordBytes, out.images[i].px.begin());
  }
  return out;
}

Dataset load_cifar100(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_cifar_records(bytes);
}

std::vector<std::uint8_t> to_cifar_records(const Dataset& data) {
  if (data.fine.size() != data.size()) {
    throw std::invalid_argument("dataset has no fine labels");
  }
  std::vector<std::uint8_t> out;
  out.reserve(data.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(data.coarse.empty() ? 0 : data.coarse[i]);
    out.push_back(data.fine[i]);
    out.insert(out.end(), data.images[i].px.begin(), data.images[i].px.end());
  }
  return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.superclasses < 1 ||
      spec.num_classes % spec.superclasses != 0) {
    throw std::invalid_argument("num_classes must be a positive multiple of superclasses");
  }
  if (spec.per_class < 0 || spec.noise_sigma < 0.0) {
    throw std::invalid_argument("invalid synthetic spec");
  }

  std::mt19937_64 rng(spec.seed);
  const double base_amp = 60.0;   // superclass pattern dominates ...
  const double class_amp = 25.0;  // ... class offsets, so superclasses cluster

  std::vector<std::array<double, kImagePixels>> bases(spec.superclasses);
  for (auto& b : bases) upsample_grid(random_grid(4, base_amp, rng), 4, b);
  std::vector<std::array<double, kImagePixels>> templates(spec.num_classes);
  const int per_super = spec.num_classes / spec.superclasses;
  for (int k = 0; k < spec.num_classes; ++k) {
    std::array<double, kImagePixels> offset;
    upsample_grid(random_grid(8, class_amp, rng), 8, offset);
    const auto& base = bases[k / per_super];
    for (int i = 0; i < kImagePixels; ++i) {
      templates[k][i] = 128.0 + base[i] + offset[i];
    }
  }

  Dataset out;
  out.num_classes = spec.num_classes;
  out.images.reserve(static_cast<std::size_t>(spec.num_classes) * spec.per_class);
  out.fine.reserve(out.images.capacity());
  out.coarse.reserve(out.images.capacity());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int s = 0; s < spec.per_class; ++s) {
      Image32 img;
      for (int i = 0; i < kImagePixels; ++i) {
        const double n = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
        img.px[i] = clamp_byte(templates[k][i] + n);
      }
      out.images.push_back(img);
      out.fine.push_back(static_cast<std::uint8_t>(k));
      out.coarse.push_back(static_cast<std::uint8_t>(k / per_super));
    }
  }
  return out;
}

Image32 pad_reflect4_crop(const Image32& img, int dx, int dy) {
  if (dx < 0 || dx > 8 || dy < 0 || dy > 8) {
    throw std::invalid_argument("crop offset out of range");
  }
  Image32 out;
  for (int c = 0; c < 3; ++c) {
    const std::uint8_t* src = img.px.data() + static_cast<std::size_t>(c) * 1024;
    std::uint8_t* dst = out.px.data() + static_cast<std::size_t>(c) * 1024;
    for (int y = 0; y < kImageSide; ++y) {
      const int sy = reflect_index(y + dy - 4);
      for (int x = 0; x < kImageSide; ++x) {
        dst[y * kImageSide + x] = src[sy * kImageSide + reflect_index(x + dx - 4)];
      }
    }
  }
  return out;
}

Image32 hflip(const Image32& img) {
  Image32 out;
  for (int c = 0; c < 3; ++c) {
    const std::uint8_t* src = img.px.data() + static_cast<std::size_t>(c) * 1024;
    std::uint8_t* dst = out.px.data() + static_cast<std::size_t>(c) * 1024;
    for (int y = 0; y < kImageSide; ++y) {
      for (int x = 0; x < kImageSide; ++x) {
        dst[y * kImageSide + x] = src[y * kImageSide + (kImageSide - 1 - x)];
      }
    }
  }
  return out;
}

Image32 augment(const Image32& img, std::mt19937_64& rng) {
  const int dx = static_cast<int>(rng() % 9);
  const int dy = static_cast<int>(rng() % 9);
  const bool flip = (rng() & 1) != 0;
  Image32 out = pad_reflect4_crop(img, dx, dy);
  return flip ? hflip(out) : out;
}

NormStats compute_norm_stats(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  NormStats stats;
  const double n = static_cast<double>(data.size()) * 1024.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (const Image32& img : data.images) {
      const std::uint8_t* p = img.px.data() + static_cast<std::size_t>(c) * 1024;
      for (int i = 0; i < 1024; ++i) {
        const double v = p[i] / 255.0;
        sum += v;
        sq += v * v;
      }
    }
    const double mean = sum / n;
    const double var = std::max(sq / n - mean * mean, 0.0);
    stats.mean[c] = static_cast<float>(mean);
    stats.stdev[c] = static_cast<float>(std::max(std::sqrt(var), 1e-6));
  }
  return stats;
}

void normalize_into(const Image32& img, const NormStats& stats, float* dst) {
  for (int c = 0; c < 3; ++c) {
    const std::uint8_t* p = img.px.data() + static_cast<std::size_t>(c) * 1024;
    const float mean = stats.mean[c];
    const float inv = 1.0f / stats.stdev[c];
    for (int i = 0; i < 1024; ++i) {
      dst[static_cast<std::size_t>(c) * 1024 + i] = (p[i] / 255.0f - mean) * inv;
    }
  }
}

}  // namespace zipfls
