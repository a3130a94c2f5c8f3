#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include "facepaste/errors.hpp"
#include "facepaste/oracle.hpp"
#include "facepaste/paste_attack.hpp"
#include "facepaste/png_io.hpp"
#include "facepaste/toy_faces.hpp"

using namespace facepaste;

namespace {

const FaceSet& shared_faces() {
  static FaceSet faces = generate_toy_faces(1);
  return faces;
}

// centered identity placement
PasteParams centered_params(const FaceSet& faces, MaskMode mode) {
  PasteParams p;
  p.cx = (faces.width() - 1) / 2.0;
  p.cy = (faces.height() - 1) / 2.0;
  p.mask_mode = mode;
  return p;
}

MaskSet constant_manual_masks(const FaceSet& faces, float value) {
  MaskSet masks;
  for (int c = 0; c < kNumClasses; ++c) {
    masks.manual.push_back(AlphaMask::filled(faces.height(), faces.width(), value));
    masks.automatic.push_back(AlphaMask::filled(faces.height(), faces.width(), 1.0f));
  }
  return masks;
}

}  // namespace

TEST_SUITE("paste_attack") {

TEST_CASE("mask mode names round-trip") {
  CHECK(to_string(MaskMode::manual) == "manual");
  CHECK(to_string(MaskMode::automatic) == "auto");
  CHECK(mask_mode_from_string("manual") == MaskMode::manual);
  CHECK(mask_mode_from_string("auto") == MaskMode::automatic);
  CHECK(mask_mode_from_string("automatic") == MaskMode::automatic);
  CHECK_THROWS_AS(mask_mode_from_string("fuzzy"), InvalidParameterError);
}

TEST_CASE("attack spec validation") {
  AttackSpec spec;
  spec.source_id = 2;
  spec.target_id = 2;
  CHECK_THROWS_AS(spec.validate(), InvalidParameterError);
  spec.target_id = 3;
  spec.init_queries = 200;
  CHECK_THROWS_AS(spec.validate(), InvalidParameterError);
  spec.init_queries = 50;
  spec.validate();
}

TEST_CASE("fully opaque centered paste reproduces the target image") {
  const auto& faces = shared_faces();
  auto masks = constant_manual_masks(faces, 1.0f);
  auto p = centered_params(faces, MaskMode::manual);
  p.bias = 0.0;
  p.slope = 40.0;  // sigmoid(40) == 1 in double
  auto out = render(faces, masks, 0, 5, p);
  CHECK(out == faces.images[5]);
}

TEST_CASE("fully transparent paste reproduces the source image bit for bit") {
  const auto& faces = shared_faces();
  auto masks = constant_manual_masks(faces, 0.0f);
  auto p = centered_params(faces, MaskMode::manual);
  p.bias = 1.0;
  p.slope = 40.0;  // alpha ~ 4e-18 everywhere, absorbed by quantization
  auto out = render(faces, masks, 3, 7, p);
  CHECK(out == faces.images[3]);
}

TEST_CASE("paste at the left edge shows only the right overlay half") {
  const auto& faces = shared_faces();
  auto masks = constant_manual_masks(faces, 1.0f);
  auto p = centered_params(faces, MaskMode::manual);
  p.cx = 0.0;
  p.bias = 0.0;
  p.slope = 40.0;
  auto out = render(faces, masks, 0, 5, p);
  const int w = faces.width();
  for (int y = 0; y < faces.height(); y += 17) {
    for (int x = 0; x < w / 2; x += 13) {
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(y, x, c) == faces.images[5].at(y, x + w / 2, c));
    }
    for (int c = 0; c < 3; ++c)
      CHECK(out.at(y, w - 1, c) == faces.images[0].at(y, w - 1, c));
  }
}

TEST_CASE("render output is snapped to the byte grid") {
  const auto& faces = shared_faces();
  auto masks = build_mask_set(faces);
  PasteParams p = centered_params(faces, MaskMode::manual);
  p.sx = 1.21;
  p.sy = 0.93;
  p.theta = 17.0;
  p.bias = 0.45;
  p.slope = 11.0;
  auto out = render(faces, masks, 2, 8, p);
  CHECK(quantize8(out) == out);
  auto again = render(faces, masks, 2, 8, p);
  CHECK(again == out);
}

TEST_CASE("auto mode renders with the blurred segmentation mask") {
  const auto& faces = shared_faces();
  auto masks = build_mask_set(faces);
  PasteParams p = centered_params(faces, MaskMode::automatic);
  p.sigma = 2.0;
  auto out = render(faces, masks, 1, 4, p);
  CHECK(out.same_shape(faces.images[1]));
  CHECK_FALSE(out == faces.images[1]);
}

TEST_CASE("objective adds confidence and capped stealthiness") {
  QueryResult r;
  r.confidence = 0.9;
  r.stealthiness = 0.8;
  CHECK(objective(r) == doctest::Approx(1.4).epsilon(1e-12));
  r.stealthiness = 0.2;
  CHECK(objective(r) == doctest::Approx(1.1).epsilon(1e-12));
  r.confidence = 0.7;
  r.stealthiness = 0.5;
  CHECK(objective(r) == doctest::Approx(1.2).epsilon(1e-12));
  r.stealthiness = 1.0;
  CHECK(objective(r) == doctest::Approx(1.2).epsilon(1e-12));  // cap binds
  r.confidence = 0.0;
  r.stealthiness = 0.0;
  CHECK(objective(r) == 0.0);
}

TEST_CASE("success requires a strict argmax and stealthiness at least one half") {
  QueryResult r;
  r.probabilities = std::vector<double>{0.1, 0.6, 0.3};
  r.confidence = 0.6;
  r.stealthiness = 0.49;
  CHECK_FALSE(is_success(r, 1));
  r.stealthiness = 0.5;
  CHECK(is_success(r, 1));
  r.probabilities = std::vector<double>{0.45, 0.45, 0.1};
  r.confidence = 0.45;
  CHECK_FALSE(is_success(r, 1));  // tied argmax fails
  r.probabilities = std::vector<double>{0.5, 0.45, 0.05};
  CHECK_FALSE(is_success(r, 1));  // another class wins
}

TEST_CASE("without probabilities success falls back to the confidence proxy") {
  QueryResult r;
  r.confidence = 0.51;
  r.stealthiness = 0.7;
  CHECK(is_success(r, 3));
  r.confidence = 0.5;
  CHECK_FALSE(is_success(r, 3));
  r.confidence = 0.9;
  r.stealthiness = 0.4999;
  CHECK_FALSE(is_success(r, 3));
}

TEST_CASE("default bounds cover the published search box") {
  const auto& faces = shared_faces();
  auto manual = default_bounds(faces, MaskMode::manual);
  REQUIRE(manual.dim() == 7);
  CHECK(manual.lower[0] == doctest::Approx(-64.0));
  CHECK(manual.upper[0] == doctest::Approx(192.0));
  CHECK(manual.lower[1] == doctest::Approx(-64.0));
  CHECK(manual.upper[1] == doctest::Approx(192.0));
  CHECK(manual.lower[2] == doctest::Approx(0.6));
  CHECK(manual.upper[2] == doctest::Approx(1.8));
  CHECK(manual.lower[4] == doctest::Approx(-40.0));
  CHECK(manual.upper[4] == doctest::Approx(40.0));
  CHECK(manual.lower[5] == doctest::Approx(0.0));
  CHECK(manual.upper[5] == doctest::Approx(1.0));
  CHECK(manual.lower[6] == doctest::Approx(5.0));
  CHECK(manual.upper[6] == doctest::Approx(40.0));

  auto automatic = default_bounds(faces, MaskMode::automatic);
  REQUIRE(automatic.dim() == 6);
  CHECK(automatic.lower[5] == doctest::Approx(0.0));
  CHECK(automatic.upper[5] == doctest::Approx(20.0));

  FaceSet big;
  for (int c = 0; c < kNumClasses; ++c) {
    big.images.push_back(RasterImage::filled(512, 512, 3, 0.5f));
  }
  auto wide = default_bounds(big, MaskMode::manual);
  CHECK(wide.lower[0] == doctest::Approx(-256.0));
  CHECK(wide.upper[0] == doctest::Approx(768.0));
}

TEST_CASE("param vectors round-trip in both modes") {
  PasteParams p;
  p.cx = 12.5;
  p.cy = -3.25;
  p.sx = 0.75;
  p.sy = 1.5;
  p.theta = -17.0;
  p.mask_mode = MaskMode::manual;
  p.bias = 0.3;
  p.slope = 33.0;
  auto v = params_to_vector(p);
  REQUIRE(v.size() == 7);
  auto q = params_from_vector(v, MaskMode::manual);
  CHECK(q.cx == p.cx);
  CHECK(q.cy == p.cy);
  CHECK(q.sx == p.sx);
  CHECK(q.sy == p.sy);
  CHECK(q.theta == p.theta);
  CHECK(q.bias == p.bias);
  CHECK(q.slope == p.slope);

  p.mask_mode = MaskMode::automatic;
  p.sigma = 4.5;
  auto va = params_to_vector(p);
  REQUIRE(va.size() == 6);
  auto qa = params_from_vector(va, MaskMode::automatic);
  CHECK(qa.sigma == 4.5);
  CHECK(qa.mask_mode == MaskMode::automatic);

  CHECK_THROWS_AS(params_from_vector({1.0, 2.0}, MaskMode::manual), InvalidParameterError);
}

TEST_CASE("opaque centered pastes classify as the pasted identity") {
  const auto& faces = shared_faces();
  auto masks = constant_manual_masks(faces, 1.0f);
  SimulatedOracle oracle(faces);
  for (auto [s, t] : std::vector<std::pair<int, int>>{{0, 1}, {5, 3}, {9, 0}}) {
    auto p = centered_params(faces, MaskMode::manual);
    p.bias = 0.0;
    p.slope = 40.0;
    auto out = render(faces, masks, s, t, p);
    auto probs = oracle.classify(out);
    int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    CHECK(argmax == t);
  }
}

TEST_CASE("mask directory overrides the default manual mask") {
  const auto& faces = shared_faces();
  auto dir = std::filesystem::temp_directory_path() / "facepaste_maskset_tests";
  std::filesystem::create_directories(dir);
  auto custom = AlphaMask::filled(faces.height(), faces.width(), 0.0f);
  for (int y = 40; y < 80; ++y)
    for (int x = 40; x < 80; ++x) custom.at(y, x) = 1.0f;
  write_png((dir / "mask_2.png").string(), mask_to_image(custom));
  auto masks = build_mask_set(faces, dir.string());
  CHECK(masks.manual[2] == custom);
  CHECK(masks.manual[3] == default_manual_mask(faces.height(), faces.width()));
  std::filesystem::remove_all(dir);

  auto wrong = AlphaMask::filled(10, 10, 1.0f);
  std::filesystem::create_directories(dir);
  write_png((dir / "mask_0.png").string(), mask_to_image(wrong));
  CHECK_THROWS_AS(build_mask_set(faces, dir.string()), ConfigError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
