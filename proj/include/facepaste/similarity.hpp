#pragma once

#include "facepaste/raster.hpp"

namespace facepaste {

struct SsimConfig {
  int window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean structural similarity over all fully-contained windows, averaged across
// channels and clamped to [0, 1]. Throws InvalidParameterError when either
// dimension is smaller than the window.
double ssim(const RasterImage& a, const RasterImage& b, const SsimConfig& cfg = {});

}  // namespace facepaste
