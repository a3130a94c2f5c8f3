#include "facepaste/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "facepaste/errors.hpp"

namespace facepaste {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// separable windowed mean of one channel plane; output is valid-region only
std::vector<double> windowed_mean(const std::vector<double>& plane, int h, int w,
                                  const std::vector<double>& win) {
  const int k = static_cast<int>(win.size());
  const int out_h = h - k + 1;
  const int out_w = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * out_w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += win[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += win[i] * tmp[static_cast<std::size_t>(y + i) * out_w + x];
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                  const std::vector<double>& win, double c1, double c2) {
  std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  std::vector<double> mu_a = windowed_mean(a, h, w, win);
  std::vector<double> mu_b = windowed_mean(b, h, w, win);
  std::vector<double> m_aa = windowed_mean(aa, h, w, win);
  std::vector<double> m_bb = windowed_mean(bb, h, w, win);
  std::vector<double> m_ab = windowed_mean(ab, h, w, win);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    double var_a = m_aa[i] - mu_a[i] * mu_a[i];
    double var_b = m_bb[i] - mu_b[i] * mu_b[i];
    double cov = m_ab[i] - mu_a[i] * mu_b[i];
    double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const RasterImage& a, const RasterImage& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) {
    throw InvalidParameterError("ssim: images must have identical dimensions");
  }
  if (a.height < cfg.window_size || a.width < cfg.window_size) {
    throw InvalidParameterError("ssim: image smaller than the comparison window");
  }
  const std::vector<double> win = gaussian_window(cfg.window_size, cfg.window_sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);

  const std::size_t plane_size = a.pixel_count();
  std::vector<double> pa(plane_size), pb(plane_size);
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    for (std::size_t p = 0; p < plane_size; ++p) {
      pa[p] = a.data[p * a.channels + c];
      pb[p] = b.data[p * b.channels + c];
    }
    total += ssim_plane(pa, pb, a.height, a.width, win, c1, c2);
  }
  return std::clamp(total / a.channels, 0.0, 1.0);
}

}  // namespace facepaste
