#pragma once

#include <cstddef>
#include <vector>

namespace facepaste {

// H x W x C image, row-major interleaved, intensities in [0,1].
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<float> data;

  static RasterImage filled(int height, int width, int channels, float value);

  float at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const RasterImage& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool operator==(const RasterImage& other) const = default;
};

// H x W transparency field, 0 = fully transparent, 1 = fully opaque.
struct AlphaMask {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  static AlphaMask filled(int height, int width, float value);

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const AlphaMask& other) const = default;
};

// Center of a pasted overlay in base-image coordinates. May extend past the
// base so that part of the overlay is cropped away.
struct Placement {
  double cx = 0.0;
  double cy = 0.0;
};

// Axis-aligned pixel rectangle.
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct RotatedRaster {
  RasterImage image;
  AlphaMask valid;  // 1 where the output pixel maps inside the source rectangle
};

// Bilinear inverse-mapping resample of one plane, pixel centers at integer
// coordinates, half-pixel alignment (the continuous image centers coincide),
// clamp-to-edge sampling. This is a fixed linear map of the source values;
// resample_plane_adjoint applies its transpose (accumulating into src_grad).
void resample_plane(const double* src, int src_h, int src_w, double* dst, int dst_h, int dst_w);
void resample_plane_adjoint(const double* dst_grad, int dst_h, int dst_w, double* src_grad,
                            int src_h, int src_w);

RasterImage resize_bilinear(const RasterImage& img, double sx, double sy);
RasterImage resize_to(const RasterImage& img, int out_height, int out_width);
RotatedRaster rotate_bilinear(const RasterImage& img, double theta_deg);
RasterImage paste(const RasterImage& base, const RasterImage& overlay, const AlphaMask& alpha,
                  Placement place);
RasterImage to_grayscale(const RasterImage& img);

AlphaMask image_to_mask(const RasterImage& img);  // 1-channel image -> mask
RasterImage mask_to_image(const AlphaMask& mask);

}  // namespace facepaste
