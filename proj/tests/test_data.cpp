#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "zipfls/data.hpp"

using namespace zipfls;

namespace {

std::vector<std::uint8_t> make_record(std::uint8_t coarse, std::uint8_t fine,
                                      std::uint8_t fill) {
  std::vector<std::uint8_t> rec(kCifarRecordBytes, fill);
  rec[0] = coarse;
  rec[1] = fine;
  return rec;
}

double image_distance(const Image32& a, const Image32& b) {
  double d = 0.0;
  for (int i = 0; i < kImagePixels; ++i) {
    const double diff = static_cast<double>(a.px[i]) - b.px[i];
    d += diff * diff;
  }
  return std::sqrt(d);
}

}  // namespace

TEST_CASE("hand-built single record parses") {
  auto rec = make_record(3, 7, 0);
  for (int i = 0; i < kImagePixels; ++i) {
    rec[2 + i] = static_cast<std::uint8_t>(i % 251);
  }
  Dataset d = parse_cifar_records(rec);
  REQUIRE(d.size() == 1);
  CHECK(d.fine[0] == 7);
  CHECK(d.coarse[0] == 3);
  CHECK(d.images[0].px[0] == 0);
  CHECK(d.images[0].px[300] == 300 % 251);
  CHECK(d.num_classes == 100);
}

TEST_CASE("truncated and corrupt files are rejected") {
  std::vector<std::uint8_t> bytes(3073, 0);  // one byte short
  CHECK_THROWS_WITH_AS(parse_cifar_records(bytes),
                       "corrupt CIFAR file: size not a multiple of 3074 bytes",
                       std::runtime_error);
  CHECK_THROWS_AS(parse_cifar_records(make_record(0, 100, 0)), std::runtime_error);
  CHECK_THROWS_AS(parse_cifar_records(make_record(20, 0, 0)), std::runtime_error);
}

TEST_CASE("loader round-trip is bit exact") {
  std::mt19937_64 rng(31);
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 17; ++r) {
    auto rec = make_record(static_cast<std::uint8_t>(rng() % 20),
                           static_cast<std::uint8_t>(rng() % 100), 0);
    for (int i = 0; i < kImagePixels; ++i) {
      rec[2 + i] = static_cast<std::uint8_t>(rng());
    }
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  CHECK(to_cifar_records(parse_cifar_records(bytes)) == bytes);
}

TEST_CASE("load_cifar100 reads from disk") {
  const auto path = std::filesystem::temp_directory_path() / "zipfls_cifar_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    auto rec = make_record(1, 42, 9);
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
  Dataset d = load_cifar100(path.string());
  CHECK(d.size() == 1);
  CHECK(d.fine[0] == 42);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_cifar100(path.string()), std::runtime_error);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SyntheticSpec spec;
  spec.num_classes = 6;
  spec.superclasses = 2;
  spec.per_class = 5;
  spec.seed = 99;
  spec.noise_sigma = 20.0;
  Dataset a = gen_synthetic(spec);
  Dataset b = gen_synthetic(spec);
  REQUIRE(a.size() == 30);
  CHECK(to_cifar_records(a) == to_cifar_records(b));

  spec.seed = 100;
  Dataset c = gen_synthetic(spec);
  CHECK(to_cifar_records(a) != to_cifar_records(c));
}

TEST_CASE("zero noise collapses each class onto its template") {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.superclasses = 2;
  spec.per_class = 3;
  spec.noise_sigma = 0.0;
  Dataset d = gen_synthetic(spec);
  for (int k = 0; k < 4; ++k) {
    for (int s = 1; s < 3; ++s) {
      CHECK(d.images[k * 3 + s].px == d.images[k * 3].px);
    }
    CHECK(d.fine[k * 3] == k);
  }
}

TEST_CASE("intra-superclass templates are closer than inter-superclass ones") {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.superclasses = 2;
  spec.per_class = 1;  // sigma 0: each image is the class template
  spec.noise_sigma = 0.0;
  spec.seed = 7;
  Dataset d = gen_synthetic(spec);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (int a = 0; a < 10; ++a) {
    for (int b = a + 1; b < 10; ++b) {
      const double dist = image_distance(d.images[a], d.images[b]);
      if (d.coarse[a] == d.coarse[b]) {
        intra += dist;
        ++n_intra;
      } else {
        inter += dist;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra < inter / n_inter);
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.superclasses = 3;  // does not divide
  CHECK_THROWS_AS(gen_synthetic(spec), std::invalid_argument);
}

TEST_CASE("center crop without flip is the identity") {
  std::mt19937_64 rng(5);
  Image32 img;
  for (auto& p : img.px) p = static_cast<std::uint8_t>(rng());
  CHECK(pad_reflect4_crop(img, 4, 4).px == img.px);
}

TEST_CASE("flip twice is the identity") {
  std::mt19937_64 rng(6);
  Image32 img;
  for (auto& p : img.px) p = static_cast<std::uint8_t>(rng());
  CHECK(hflip(hflip(img)).px == img.px);
  CHECK(hflip(img).px != img.px);
}

TEST_CASE("reflect crop matches an explicitly padded oracle") {
  std::mt19937_64 rng(7);
  Image32 img;
  for (auto& p : img.px) p = static_cast<std::uint8_t>(rng());

  // oracle: build the 40x40 reflect-padded plane literally, then crop
  auto padded_at = [&](int c, int py, int px) {
    auto reflect = [](int i) {
      if (i < 0) return -i;
      if (i >= 32) return 62 - i;
      return i;
    };
    return img.px[(static_cast<std::size_t>(c) * 32 + reflect(py - 4)) * 32 +
                  reflect(px - 4)];
  };
  for (int dy : {0, 3, 8}) {
    for (int dx : {0, 5, 8}) {
      Image32 got = pad_reflect4_crop(img, dx, dy);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 32; ++y) {
          for (int x = 0; x < 32; ++x) {
            REQUIRE(got.px[(static_cast<std::size_t>(c) * 32 + y) * 32 + x] ==
                    padded_at(c, y + dy, x + dx));
          }
        }
      }
    }
  }
  CHECK_THROWS_AS(pad_reflect4_crop(img, 9, 0), std::invalid_argument);
}

TEST_CASE("augment is reproducible for a fixed rng seed") {
  std::mt19937_64 data_rng(8);
  Image32 img;
  for (auto& p : img.px) p = static_cast<std::uint8_t>(data_rng());

  std::mt19937_64 a(1234), b(1234), c(1235);
  std::uint64_t digest_a = 0, digest_b = 0, digest_c = 0;
  for (int i = 0; i < 20; ++i) {
    auto mix = [](std::uint64_t h, const Image32& im) {
      for (auto p : im.px) h = h * 1099511628211ULL + p;
      return h;
    };
    digest_a = mix(digest_a, augment(img, a));
    digest_b = mix(digest_b, augment(img, b));
    digest_c = mix(digest_c, augment(img, c));
  }
  CHECK(digest_a == digest_b);
  CHECK(digest_a != digest_c);
}

TEST_CASE("normalization stats match a hand computation") {
  Dataset d;
  d.num_classes = 2;
  Image32 a, b;
  a.px.fill(0);
  b.px.fill(255);
  // red channel of image a set to 51 -> mean over both images 0.6, others 0.5
  for (int i = 0; i < 1024; ++i) a.px[i] = 51;
  d.images = {a, b};
  d.fine = {0, 1};
  NormStats stats = compute_norm_stats(d);
  CHECK(stats.mean[0] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(stats.mean[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(stats.mean[2] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(stats.stdev[0] == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(stats.stdev[1] == doctest::Approx(0.5).epsilon(1e-6));

  float buf[kImagePixels];
  normalize_into(a, stats, buf);
  CHECK(buf[0] == doctest::Approx((51.0 / 255.0 - 0.6) / 0.4).epsilon(1e-5));
  CHECK(buf[1024] == doctest::Approx((0.0 - 0.5) / 0.5).epsilon(1e-5));
}
