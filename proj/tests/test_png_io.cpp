#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"
#include "facepaste/rng.hpp"

using namespace facepaste;

namespace {

RasterImage random_bytes_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RasterImage img = RasterImage::filled(h, w, c, 0.0f);
  for (auto& v : img.data) {
    int b = static_cast<int>(uniform01(rng) * 256.0);
    if (b > 255) b = 255;
    v = static_cast<float>(b / 255.0);
  }
  return img;
}

}  // namespace

TEST_SUITE("png_io") {

TEST_CASE("intensity_to_byte rounds half up and clamps") {
  CHECK(intensity_to_byte(0.0) == 0);
  CHECK(intensity_to_byte(1.0) == 255);
  CHECK(intensity_to_byte(-0.2) == 0);
  CHECK(intensity_to_byte(1.7) == 255);
  CHECK(intensity_to_byte(0.5 / 255.0) == 1);
  CHECK(intensity_to_byte(0.49 / 255.0) == 0);
  CHECK(intensity_to_byte(76.5 / 255.0) == 77);
}

TEST_CASE("quantize8 snaps to the byte grid and is idempotent") {
  RasterImage img = RasterImage::filled(1, 3, 1, 0.0f);
  img.at(0, 0) = 0.3f;
  img.at(0, 1) = 0.9999f;
  img.at(0, 2) = 0.0001f;
  auto q = quantize8(img);
  CHECK(q.at(0, 0) == static_cast<float>(77 / 255.0));
  CHECK(q.at(0, 1) == 1.0f);
  CHECK(q.at(0, 2) == 0.0f);
  CHECK(quantize8(q) == q);
}

TEST_CASE("png encode and decode round-trip byte-grid images exactly") {
  for (int c : {1, 3}) {
    auto img = random_bytes_image(21, 17, c, 5 + c);
    auto decoded = decode_png(encode_png(img));
    CHECK(decoded == img);
  }
}

TEST_CASE("png file write and read round-trips exactly") {
  auto dir = std::filesystem::temp_directory_path() / "facepaste_png_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "roundtrip.png").string();
  auto img = random_bytes_image(12, 16, 3, 77);
  write_png(path, img);
  CHECK(read_png(path) == img);
  std::filesystem::remove(path);
}

TEST_CASE("decode rejects non-png bytes") {
  CHECK_THROWS_AS(decode_png("definitely not a png"), InvalidParameterError);
}

TEST_CASE("base64 round trip and known vectors") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_decode("Zm9vYmFy") == "foobar");
  std::mt19937_64 rng(9);
  std::string blob;
  for (int i = 0; i < 257; ++i) blob.push_back(static_cast<char>(rng() & 0xff));
  CHECK(base64_decode(base64_encode(blob)) == blob);
}

TEST_CASE("base64 rejects malformed text") {
  CHECK_THROWS_AS(base64_decode("Zg="), InvalidParameterError);
  CHECK_THROWS_AS(base64_decode("@@@@"), InvalidParameterError);
  CHECK_THROWS_AS(base64_decode("Zg===="), InvalidParameterError);
}

}  // TEST_SUITE
