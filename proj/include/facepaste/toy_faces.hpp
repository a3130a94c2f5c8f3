#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facepaste/raster.hpp"

namespace facepaste {

inline constexpr int kNumClasses = 10;

struct FaceSet {
  std::vector<RasterImage> images;   // exactly kNumClasses, uniform dimensions
  std::vector<PixelRect> face_boxes; // per-class face bounds; empty when unknown

  int height() const { return images.empty() ? 0 : images.front().height; }
  int width() const { return images.empty() ? 0 : images.front().width; }

  // throws InvalidParameterError on count or dimension violations
  void validate() const;
};

// Deterministic synthetic portrait per class: identical muted background,
// per-class skin tone, hair, eyes, brows, nose, mouth. Values sit on the
// 8-bit grid so a PNG round trip is lossless.
FaceSet generate_toy_faces(std::uint64_t seed);

// face_<i>.png for i in 0..9; write_faces creates the directory
FaceSet load_faces(const std::string& dir);
void write_faces(const FaceSet& faces, const std::string& dir);

}  // namespace facepaste
