#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "facepaste/errors.hpp"
#include "facepaste/masks.hpp"
#include "facepaste/png_io.hpp"
#include "facepaste/rng.hpp"

using namespace facepaste;

namespace {

// Direct 2-D convolution with the product kernel, clamp-to-edge. Reference
// for the separable implementation.
AlphaMask blur_reference(const AlphaMask& m, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  AlphaMask out = AlphaMask::filled(m.height, m.width, 0.0f);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          int ys = std::clamp(y + dy, 0, m.height - 1);
          int xs = std::clamp(x + dx, 0, m.width - 1);
          acc += k[dy + radius] * k[dx + radius] * m.at(ys, xs);
        }
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "facepaste_mask_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("masks") {

TEST_CASE("sigmoid_mask maps the bias point to one half") {
  AlphaMask m = AlphaMask::filled(2, 2, 0.5f);
  auto out = sigmoid_mask(m, {0.5, 20.0});
  for (float v : out.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("sigmoid_mask saturates a binary mask at extreme slope") {
  AlphaMask m = AlphaMask::filled(1, 2, 0.0f);
  m.at(0, 1) = 1.0f;
  auto out = sigmoid_mask(m, {0.0, 40.0});
  CHECK(out.at(0, 0) == 0.5f);
  CHECK(out.at(0, 1) == 1.0f);  // 1/(1+e^-40) rounds to 1 in double
  auto inv = sigmoid_mask(m, {1.0, 40.0});
  CHECK(inv.at(0, 0) < 1e-15f);
  CHECK(inv.at(0, 1) == 0.5f);
}

TEST_CASE("sigmoid_mask is monotone in the input value") {
  AlphaMask m = AlphaMask::filled(1, 3, 0.0f);
  m.at(0, 0) = 0.2f;
  m.at(0, 1) = 0.5f;
  m.at(0, 2) = 0.8f;
  auto out = sigmoid_mask(m, {0.4, 12.0});
  CHECK(out.at(0, 0) < out.at(0, 1));
  CHECK(out.at(0, 1) < out.at(0, 2));
}

TEST_CASE("blur_mask validates its inputs") {
  AlphaMask m = AlphaMask::filled(8, 8, 1.0f);
  CHECK_THROWS_AS(blur_mask(m, -0.5), InvalidParameterError);
  AlphaMask soft = AlphaMask::filled(8, 8, 0.5f);
  CHECK_THROWS_AS(blur_mask(soft, 1.0), InvalidParameterError);
}

TEST_CASE("blur_mask with zero sigma is the identity") {
  std::mt19937_64 rng(3);
  AlphaMask m = AlphaMask::filled(9, 7, 0.0f);
  for (auto& v : m.values) v = uniform01(rng) < 0.5 ? 0.0f : 1.0f;
  CHECK(blur_mask(m, 0.0) == m);
}

TEST_CASE("blur_mask matches a direct convolution") {
  std::mt19937_64 rng(4);
  AlphaMask m = AlphaMask::filled(9, 7, 0.0f);
  for (auto& v : m.values) v = uniform01(rng) < 0.5 ? 0.0f : 1.0f;
  for (double sigma : {0.7, 1.3, 2.0}) {
    auto fast = blur_mask(m, sigma);
    auto ref = blur_reference(m, sigma);
    for (std::size_t i = 0; i < fast.values.size(); ++i)
      CHECK(fast.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("blur_mask keeps values in the unit interval") {
  AlphaMask m = AlphaMask::filled(12, 12, 0.0f);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) m.at(y, x) = 1.0f;
  auto out = blur_mask(m, 2.5);
  for (float v : out.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(out.at(6, 6) > out.at(0, 0));
}

TEST_CASE("auto_mask recovers a skin-toned rectangle in band") {
  RasterImage img = RasterImage::filled(40, 40, 3, 0.0f);
  for (auto& v : img.data) v = 0.1f;  // dark background, below the intensity band
  for (int y = 10; y < 30; ++y) {
    for (int x = 8; x < 28; ++x) {
      img.at(y, x, 0) = 0.8f;
      img.at(y, x, 1) = 0.6f;
      img.at(y, x, 2) = 0.5f;
    }
  }
  auto mask = auto_mask(img);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      bool inside = y >= 10 && y < 30 && x >= 8 && x < 28;
      CHECK(mask.at(y, x) == (inside ? 1.0f : 0.0f));
    }
  }
}

TEST_CASE("auto_mask keeps only the largest component") {
  RasterImage img = RasterImage::filled(40, 40, 3, 0.1f);
  auto put = [&](int y0, int y1, int x0, int x1) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        img.at(y, x, 0) = 0.8f;
        img.at(y, x, 1) = 0.6f;
        img.at(y, x, 2) = 0.5f;
      }
  };
  put(8, 28, 8, 28);   // 400 px
  put(33, 38, 33, 38); // 25 px, disconnected
  auto mask = auto_mask(img);
  CHECK(mask.at(15, 15) == 1.0f);
  CHECK(mask.at(35, 35) == 0.0f);
}

TEST_CASE("auto_mask falls back to a centered ellipse when the band is empty") {
  RasterImage img = RasterImage::filled(40, 40, 3, 0.05f);
  auto mask = auto_mask(img);
  CHECK(mask.at(20, 20) == 1.0f);
  CHECK(mask.at(0, 0) == 0.0f);
  double area = 0.0;
  for (float v : mask.values) area += v;
  double frac = area / (40.0 * 40.0);
  // pi * (0.20 w) * (0.275 h) / (w h) ~ 0.173
  CHECK(frac > 0.10);
  CHECK(frac < 0.25);
}

TEST_CASE("load_mask round-trips a saved grayscale mask") {
  auto mask = default_manual_mask(32, 32);
  auto path = temp_file("roundtrip_mask.png");
  write_png(path.string(), mask_to_image(mask));
  auto loaded = load_mask(path.string());
  CHECK(loaded == mask);
  std::filesystem::remove(path);
}

TEST_CASE("default_manual_mask shape and landmark structure") {
  auto m = default_manual_mask(128, 128);
  CHECK(m.height == 128);
  CHECK(m.width == 128);
  CHECK(m.at(0, 0) == 0.0f);
  CHECK(m.at(127, 127) == 0.0f);
  // left eye center: (cy - 0.10 h, cx - 0.14 w)
  CHECK(m.at(51, 46) > 0.9f);
  // forehead inside the face ellipse but outside the feature lobes
  CHECK(m.at(30, 64) == doctest::Approx(0.88).epsilon(0.01));
  for (float v : m.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    // snapped to the 8-bit grid
    double scaled = static_cast<double>(v) * 255.0;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-4);
  }
}

}  // TEST_SUITE
