#pragma once

#include <string>

#include "facepaste/raster.hpp"

namespace facepaste {

// Sigmoid reshaping of a continuous mask: bias shifts the transition point,
// slope sharpens it.
struct MaskShapeParams {
  double bias = 0.5;   // in [0,1]
  double slope = 20.0;  // in [5,40]
};

// Pixel-band heuristic used in place of a learned face segmenter.
struct AutoMaskConfig {
  double intensity_min = 0.25;
  double intensity_max = 0.97;
  double chroma_min = 0.0;
  double chroma_max = 0.5;   // chroma = max(R,G,B) - min(R,G,B)
  double min_component_frac = 0.05;
  int closing_radius = 2;
};

AlphaMask sigmoid_mask(const AlphaMask& m, MaskShapeParams params);

// Gaussian blur of a binary mask, kernel radius ceil(3*sigma), clamp-to-edge.
AlphaMask blur_mask(const AlphaMask& m, double sigma);

// Binary face-region mask: largest connected component of pixels inside the
// configured intensity/chroma band, morphologically closed. Falls back to a
// centered ellipse (55% of height, 40% of width) when the component is tiny.
AlphaMask auto_mask(const RasterImage& img, const AutoMaskConfig& cfg = {});

// Grayscale PNG -> values/255.
AlphaMask load_mask(const std::string& path);

// Continuous face-shaped mask with raised eye/nose/mouth bands; stands in for
// hand-painted per-class masks when none are supplied.
AlphaMask default_manual_mask(int height, int width);

}  // namespace facepaste
