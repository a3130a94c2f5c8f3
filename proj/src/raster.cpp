#include "facepaste/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "facepaste/errors.hpp"

namespace facepaste {

RasterImage RasterImage::filled(int height, int width, int channels, float value) {
  RasterImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(height) * width * channels, value);
  return img;
}

AlphaMask AlphaMask::filled(int height, int width, float value) {
  AlphaMask m;
  m.height = height;
  m.width = width;
  m.values.assign(static_cast<std::size_t>(height) * width, value);
  return m;
}

namespace {

inline double sample_clamped(const double* src, int h, int w, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0;
  double fy = y - y0;
  int x0c = std::clamp(x0, 0, w - 1);
  int x1c = std::clamp(x0 + 1, 0, w - 1);
  int y0c = std::clamp(y0, 0, h - 1);
  int y1c = std::clamp(y0 + 1, 0, h - 1);
  double top = (1.0 - fx) * src[static_cast<std::size_t>(y0c) * w + x0c] +
               fx * src[static_cast<std::size_t>(y0c) * w + x1c];
  double bot = (1.0 - fx) * src[static_cast<std::size_t>(y1c) * w + x0c] +
               fx * src[static_cast<std::size_t>(y1c) * w + x1c];
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace

void resample_plane(const double* src, int src_h, int src_w, double* dst, int dst_h, int dst_w) {
  const double rx = static_cast<double>(src_w) / dst_w;
  const double ry = static_cast<double>(src_h) / dst_h;
  for (int oy = 0; oy < dst_h; ++oy) {
    double sy = (oy + 0.5) * ry - 0.5;
    for (int ox = 0; ox < dst_w; ++ox) {
      double sx = (ox + 0.5) * rx - 0.5;
      dst[static_cast<std::size_t>(oy) * dst_w + ox] = sample_clamped(src, src_h, src_w, sx, sy);
    }
  }
}

void resample_plane_adjoint(const double* dst_grad, int dst_h, int dst_w, double* src_grad,
                            int src_h, int src_w) {
  const double rx = static_cast<double>(src_w) / dst_w;
  const double ry = static_cast<double>(src_h) / dst_h;
  for (int oy = 0; oy < dst_h; ++oy) {
    double sy = (oy + 0.5) * ry - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    double fy = sy - y0;
    int y0c = std::clamp(y0, 0, src_h - 1);
    int y1c = std::clamp(y0 + 1, 0, src_h - 1);
    for (int ox = 0; ox < dst_w; ++ox) {
      double sx = (ox + 0.5) * rx - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      double fx = sx - x0;
      int x0c = std::clamp(x0, 0, src_w - 1);
      int x1c = std::clamp(x0 + 1, 0, src_w - 1);
      double g = dst_grad[static_cast<std::size_t>(oy) * dst_w + ox];
      src_grad[static_cast<std::size_t>(y0c) * src_w + x0c] += g * (1.0 - fy) * (1.0 - fx);
      src_grad[static_cast<std::size_t>(y0c) * src_w + x1c] += g * (1.0 - fy) * fx;
      src_grad[static_cast<std::size_t>(y1c) * src_w + x0c] += g * fy * (1.0 - fx);
      src_grad[static_cast<std::size_t>(y1c) * src_w + x1c] += g * fy * fx;
    }
  }
}

RasterImage resize_to(const RasterImage& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw InvalidParameterError("resize_to: output dimensions must be positive");
  }
  RasterImage out = RasterImage::filled(out_height, out_width, img.channels, 0.0f);
  std::vector<double> src_plane(img.pixel_count());
  std::vector<double> dst_plane(out.pixel_count());
  for (int c = 0; c < img.channels; ++c) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      src_plane[p] = img.data[p * img.channels + c];
    }
    resample_plane(src_plane.data(), img.height, img.width, dst_plane.data(), out_height,
                   out_width);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
      out.data[p * out.channels + c] = static_cast<float>(dst_plane[p]);
    }
  }
  return out;
}

RasterImage resize_bilinear(const RasterImage& img, double sx, double sy) {
  if (!(sx > 0.0) || !(sy > 0.0)) {
    throw InvalidParameterError("resize_bilinear: scale factors must be positive");
  }
  int out_w = std::max(1, static_cast<int>(std::lround(img.width * sx)));
  int out_h = std::max(1, static_cast<int>(std::lround(img.height * sy)));
  if (out_h == img.height && out_w == img.width) {
    return img;
  }
  return resize_to(img, out_h, out_w);
}

RotatedRaster rotate_bilinear(const RasterImage& img, double theta_deg) {
  const double theta = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const int out_w = static_cast<int>(std::ceil(img.width * std::abs(c) + img.height * std::abs(s)));
  const int out_h = static_cast<int>(std::ceil(img.width * std::abs(s) + img.height * std::abs(c)));

  RotatedRaster out;
  out.image = RasterImage::filled(out_h, out_w, img.channels, 0.0f);
  out.valid = AlphaMask::filled(out_h, out_w, 0.0f);

  const double cx_in = (img.width - 1) / 2.0;
  const double cy_in = (img.height - 1) / 2.0;
  const double cx_out = (out_w - 1) / 2.0;
  const double cy_out = (out_h - 1) / 2.0;

  std::vector<double> plane(img.pixel_count());
  std::vector<std::vector<double>> planes(img.channels, plane);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      planes[ch][p] = img.data[p * img.channels + ch];
    }
  }

  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double dx = ox - cx_out;
      double dy = oy - cy_out;
      // inverse rotation back into source coordinates
      double sx = cx_in + c * dx + s * dy;
      double sy = cy_in - s * dx + c * dy;
      bool inside = sx >= -0.5 && sx <= img.width - 0.5 && sy >= -0.5 && sy <= img.height - 0.5;
      if (!inside) continue;
      out.valid.at(oy, ox) = 1.0f;
      for (int ch = 0; ch < img.channels; ++ch) {
        out.image.at(oy, ox, ch) =
            static_cast<float>(sample_clamped(planes[ch].data(), img.height, img.width, sx, sy));
      }
    }
  }
  return out;
}

RasterImage paste(const RasterImage& base, const RasterImage& overlay, const AlphaMask& alpha,
                  Placement place) {
  if (alpha.height != overlay.height || alpha.width != overlay.width) {
    throw InvalidParameterError("paste: alpha mask dimensions must match the overlay");
  }
  if (base.channels != overlay.channels) {
    throw InvalidParameterError("paste: base and overlay channel counts differ");
  }
  // Real-valued center, rounded to an integer top-left corner exactly once.
  const int x0 = static_cast<int>(std::lround(place.cx - (overlay.width - 1) / 2.0));
  const int y0 = static_cast<int>(std::lround(place.cy - (overlay.height - 1) / 2.0));

  RasterImage out = base;
  const int ys = std::max(0, -y0);
  const int ye = std::min(overlay.height, base.height - y0);
  const int xs = std::max(0, -x0);
  const int xe = std::min(overlay.width, base.width - x0);
  for (int j = ys; j < ye; ++j) {
    for (int i = xs; i < xe; ++i) {
      double a = alpha.at(j, i);
      for (int ch = 0; ch < base.channels; ++ch) {
        double b = base.at(y0 + j, x0 + i, ch);
        double o = overlay.at(j, i, ch);
        out.at(y0 + j, x0 + i, ch) = static_cast<float>((1.0 - a) * b + a * o);
      }
    }
  }
  return out;
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels == 1) {
    return img;
  }
  if (img.channels != 3) {
    throw InvalidParameterError("to_grayscale: expected 1 or 3 channels, got " +
                                std::to_string(img.channels));
  }
  RasterImage out = RasterImage::filled(img.height, img.width, 1, 0.0f);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    double luma = 0.299 * img.data[p * 3] + 0.587 * img.data[p * 3 + 1] +
                  0.114 * img.data[p * 3 + 2];
    out.data[p] = static_cast<float>(luma);
  }
  return out;
}

AlphaMask image_to_mask(const RasterImage& img) {
  if (img.channels != 1) {
    throw InvalidParameterError("image_to_mask: expected a 1-channel image");
  }
  AlphaMask m;
  m.height = img.height;
  m.width = img.width;
  m.values = img.data;
  return m;
}

RasterImage mask_to_image(const AlphaMask& mask) {
  RasterImage img;
  img.height = mask.height;
  img.width = mask.width;
  img.channels = 1;
  img.data = mask.values;
  return img;
}

}  // namespace facepaste
