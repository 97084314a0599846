#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace zipfls {

constexpr int kImageSide = 32;
constexpr int kImageChannels = 3;
constexpr int kImagePixels = kImageChannels * kImageSide * kImageSide;
constexpr int kCifarRecordBytes = kImagePixels + 2;  // coarse byte, fine byte, pixels

// One 3x32x32 image, channel planes row-major (R plane, G plane, B plane).
struct Image32 {
  std::array<std::uint8_t, kImagePixels> px{};
};

struct Dataset {
  int num_classes = 0;
  std::vector<Image32> images;
  std::vector<std::uint8_t> fine;
  std::vector<std::uint8_t> coarse;  // empty when the source has none
  std::size_t size() const { return images.size(); }
};

// CIFAR-100 binary format: records of 3074 bytes, [coarse][fine][3072 pixels].
Dataset parse_cifar_records(std::span<const std::uint8_t> bytes);
Dataset load_cifar100(const std::string& path);
std::vector<std::uint8_t> to_cifar_records(const Dataset& data);

struct SyntheticSpec {
  int num_classes = 10;
  int superclasses = 2;   // must divide num_classes
  int per_class = 100;
  std::uint64_t seed = 0;
  double noise_sigma = 25.0;
};

// Deterministic class-template dataset: each superclass gets a smooth base
// pattern, each class a smaller offset pattern, samples add Gaussian noise.
// Samples are class-major: class 0 first, then class 1, ...
Dataset gen_synthetic(const SyntheticSpec& spec);

// Reflect-pad by 4 then take the 32x32 crop at offset (dx, dy), 0 <= dx,dy <= 8.
// (4, 4) is the identity crop.
Image32 pad_reflect4_crop(const Image32& img, int dx, int dy);
Image32 hflip(const Image32& img);
// Random crop + horizontal flip with p = 0.5, the standard CIFAR recipe.
Image32 augment(const Image32& img, std::mt19937_64& rng);

// Per-channel mean/std over a dataset, computed on pixel values scaled to
// [0, 1]. Eval data must reuse the training-set constants.
struct NormStats {
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  std::array<float, 3> stdev{1.f, 1.f, 1.f};
};
NormStats compute_norm_stats(const Dataset& data);
// dst must hold kImagePixels floats.
void normalize_into(const Image32& img, const NormStats& stats, float* dst);

}  // namespace zipfls
