#include "facepaste/masks.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"

namespace facepaste {

AlphaMask sigmoid_mask(const AlphaMask& m, MaskShapeParams params) {
  AlphaMask out = m;
  for (float& v : out.values) {
    double z = (static_cast<double>(v) - params.bias) * params.slope;
    v = static_cast<float>(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

AlphaMask blur_mask(const AlphaMask& m, double sigma) {
  if (sigma < 0.0) {
    throw InvalidParameterError("blur_mask: sigma must be non-negative");
  }
  for (float v : m.values) {
    if (v != 0.0f && v != 1.0f) {
      throw InvalidParameterError("blur_mask: input mask must be binary");
    }
  }
  if (sigma == 0.0) {
    return m;
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = m.height;
  const int w = m.width;
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  // horizontal pass, clamp-to-edge
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int xs = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + radius] * m.at(y, xs);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  AlphaMask out = AlphaMask::filled(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int ys = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(ys) * w + x];
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

namespace {

AlphaMask centered_ellipse(int h, int w) {
  AlphaMask m = AlphaMask::filled(h, w, 0.0f);
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;
  const double ry = 0.55 * h / 2.0;
  const double rx = 0.40 * w / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double u = (x - cx) / rx;
      double v = (y - cy) / ry;
      if (u * u + v * v <= 1.0) m.at(y, x) = 1.0f;
    }
  }
  return m;
}

std::vector<char> band_select(const RasterImage& img, const AutoMaskConfig& cfg) {
  std::vector<char> in_band(img.pixel_count(), 0);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    double intensity;
    double chroma;
    if (img.channels == 3) {
      double r = img.data[p * 3];
      double g = img.data[p * 3 + 1];
      double b = img.data[p * 3 + 2];
      intensity = 0.299 * r + 0.587 * g + 0.114 * b;
      chroma = std::max({r, g, b}) - std::min({r, g, b});
    } else {
      intensity = img.data[p];
      chroma = 0.0;
    }
    in_band[p] = intensity >= cfg.intensity_min && intensity <= cfg.intensity_max &&
                 chroma >= cfg.chroma_min && chroma <= cfg.chroma_max;
  }
  return in_band;
}

// 4-connected largest component over the band pixels
std::vector<char> largest_component(const std::vector<char>& in_band, int h, int w,
                                    std::size_t* size_out) {
  std::vector<int> label(in_band.size(), -1);
  int next_label = 0;
  std::size_t best_size = 0;
  int best_label = -1;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < in_band.size(); ++start) {
    if (!in_band[start] || label[start] >= 0) continue;
    std::size_t count = 0;
    stack.push_back(start);
    label[start] = next_label;
    while (!stack.empty()) {
      std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      int y = static_cast<int>(p / w);
      int x = static_cast<int>(p % w);
      const int dy[4] = {-1, 1, 0, 0};
      const int dx[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int ny = y + dy[k];
        int nx = x + dx[k];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (in_band[q] && label[q] < 0) {
          label[q] = next_label;
          stack.push_back(q);
        }
      }
    }
    if (count > best_size) {
      best_size = count;
      best_label = next_label;
    }
    ++next_label;
  }
  std::vector<char> keep(in_band.size(), 0);
  for (std::size_t p = 0; p < in_band.size(); ++p) {
    keep[p] = label[p] == best_label && best_label >= 0;
  }
  *size_out = best_size;
  return keep;
}

std::vector<char> dilate(const std::vector<char>& in, int h, int w, int radius) {
  std::vector<char> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy) {
        for (int dx = -radius; dx <= radius && !hit; ++dx) {
          int ny = y + dy;
          int nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (in[static_cast<std::size_t>(ny) * w + nx]) hit = true;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = hit;
    }
  }
  return out;
}

std::vector<char> erode(const std::vector<char>& in, int h, int w, int radius) {
  std::vector<char> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -radius; dy <= radius && all; ++dy) {
        for (int dx = -radius; dx <= radius && all; ++dx) {
          int ny = std::clamp(y + dy, 0, h - 1);
          int nx = std::clamp(x + dx, 0, w - 1);
          if (!in[static_cast<std::size_t>(ny) * w + nx]) all = false;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = all;
    }
  }
  return out;
}

}  // namespace

AlphaMask auto_mask(const RasterImage& img, const AutoMaskConfig& cfg) {
  const int h = img.height;
  const int w = img.width;
  std::vector<char> in_band = band_select(img, cfg);
  std::size_t component_size = 0;
  std::vector<char> component = largest_component(in_band, h, w, &component_size);
  if (component_size < cfg.min_component_frac * img.pixel_count()) {
    return centered_ellipse(h, w);
  }
  std::vector<char> closed = erode(dilate(component, h, w, cfg.closing_radius), h, w,
                                   cfg.closing_radius);
  AlphaMask m = AlphaMask::filled(h, w, 0.0f);
  for (std::size_t p = 0; p < closed.size(); ++p) {
    m.values[p] = closed[p] ? 1.0f : 0.0f;
  }
  return m;
}

AlphaMask load_mask(const std::string& path) {
  RasterImage img = read_png(path);
  if (img.channels != 1) {
    img = to_grayscale(img);
  }
  return image_to_mask(img);
}

AlphaMask default_manual_mask(int height, int width) {
  AlphaMask m = AlphaMask::filled(height, width, 0.0f);
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;

  // soft elliptical lobe: 1 inside, linear ramp of ~edge width at the rim
  auto lobe = [](double x, double y, double lx, double ly, double rx, double ry, double edge) {
    double u = (x - lx) / rx;
    double v = (y - ly) / ry;
    double r = std::sqrt(u * u + v * v);
    return std::clamp((1.0 - r) / edge + 1.0, 0.0, 1.0);
  };

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // high face-oval base: most bias values paste the whole identity region
      // opaquely, while the raised bands survive biases close to 1. The wider
      // halo drops out first, leaving a face-only paste at mid biases.
      double halo = 0.78 * lobe(x, y, cx, cy, 0.55 * width, 0.62 * height, 0.10);
      double face = 0.88 * lobe(x, y, cx, cy - 0.02 * height, 0.40 * width, 0.50 * height, 0.10);
      double eyes = 0.95 * std::max(lobe(x, y, cx - 0.14 * width, cy - 0.10 * height,
                                         0.10 * width, 0.06 * height, 0.35),
                                    lobe(x, y, cx + 0.14 * width, cy - 0.10 * height,
                                         0.10 * width, 0.06 * height, 0.35));
      double nose = 0.85 * lobe(x, y, cx, cy + 0.04 * height, 0.05 * width, 0.12 * height, 0.35);
      double mouth = 0.95 * lobe(x, y, cx, cy + 0.24 * height, 0.14 * width, 0.055 * height, 0.35);
      double value = std::max({halo, face, eyes, nose, mouth});
      // snap to the 8-bit grid so saving and reloading the mask is lossless
      m.at(y, x) = static_cast<float>(intensity_to_byte(value) / 255.0);
    }
  }
  return m;
}

}  // namespace facepaste
