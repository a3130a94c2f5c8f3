#include "facepaste/pgd_attack.hpp"

#include <algorithm>
#include <cmath>

#include "facepaste/errors.hpp"
#include "facepaste/similarity.hpp"

namespace facepaste {

void PgdConfig::validate() const {
  if (step_size <= 0.0) {
    throw InvalidParameterError("step_size must be positive");
  }
  if (steps < 0) {
    throw InvalidParameterError("steps must be non-negative");
  }
  if (ssim_floor <= 0.0 || ssim_floor >= 1.0) {
    throw InvalidParameterError("ssim_floor must lie in (0, 1)");
  }
  if (crop_size < 8) {
    throw InvalidParameterError("crop_size too small");
  }
}

PixelRect default_crop_box(const FaceSet& faces, int class_id) {
  if (class_id < 0 || class_id >= static_cast<int>(faces.images.size())) {
    throw InvalidParameterError("class id out of range");
  }
  if (!faces.face_boxes.empty()) {
    return faces.face_boxes[class_id];
  }
  int w = static_cast<int>(std::lround(0.7 * faces.width()));
  int h = static_cast<int>(std::lround(0.7 * faces.height()));
  return {(faces.width() - w) / 2, (faces.height() - h) / 2, w, h};
}

RasterImage pgd_step(const RasterImage& x, const RasterImage& grad, double eta) {
  if (!x.same_shape(grad)) {
    throw InvalidParameterError("pgd_step: image/gradient shape mismatch");
  }
  RasterImage out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double g = grad.data[i];
    double s = (g > 0.0) ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
    out.data[i] = static_cast<float>(std::clamp(static_cast<double>(x.data[i]) + eta * s, 0.0, 1.0));
  }
  return out;
}

namespace {

RasterImage blend_toward(const RasterImage& x0, const RasterImage& x, double lambda) {
  RasterImage out = x0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(x0.data[i] + lambda * (static_cast<double>(x.data[i]) -
                                                           x0.data[i]));
  }
  return out;
}

// largest blend factor keeping ssim(x0, blend) >= floor; 1 when x qualifies
double project_lambda(const RasterImage& x0, const RasterImage& x, double floor) {
  if (ssim(x0, x) >= floor) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 30; ++i) {
    double mid = 0.5 * (lo + hi);
    if (ssim(x0, blend_toward(x0, x, mid)) >= floor) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

RasterImage crop_image(const RasterImage& img, const PixelRect& box) {
  RasterImage out = RasterImage::filled(box.height, box.width, img.channels, 0.0f);
  for (int y = 0; y < box.height; ++y) {
    for (int x = 0; x < box.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = img.at(box.y + y, box.x + x, c);
      }
    }
  }
  return out;
}

PixelRect clamp_box(PixelRect box, const RasterImage& img) {
  box.x = std::clamp(box.x, 0, img.width - 1);
  box.y = std::clamp(box.y, 0, img.height - 1);
  box.width = std::clamp(box.width, 1, img.width - box.x);
  box.height = std::clamp(box.height, 1, img.height - box.y);
  return box;
}

}  // namespace

RasterImage ssim_project(const RasterImage& x0, const RasterImage& x, double floor, double tol) {
  (void)tol;  // the 30-round bisection lands far inside the tolerance band
  if (!x0.same_shape(x)) {
    throw InvalidParameterError("ssim_project: shape mismatch");
  }
  double lambda = project_lambda(x0, x, floor);
  if (lambda >= 1.0) return x;
  return blend_toward(x0, x, lambda);
}

PgdResult run_pgd(int source_id, int target_id, const SimulatedOracle& surrogate,
                  const PgdConfig& cfg, Oracle* eval_oracle) {
  cfg.validate();
  const FaceSet& faces = surrogate.faces();
  const int n = static_cast<int>(faces.images.size());
  if (source_id < 0 || source_id >= n || target_id < 0 || target_id >= n) {
    throw InvalidParameterError("class id out of range");
  }
  if (source_id == target_id) {
    throw InvalidParameterError("source and target class must differ");
  }
  const RasterImage& source = faces.images[source_id];
  const PixelRect box = clamp_box(cfg.crop_box, source);
  const int ch = source.channels;

  RasterImage crop_ref = resize_to(crop_image(source, box), cfg.crop_size, cfg.crop_size);
  RasterImage x_crop = crop_ref;

  // composite = source with the upsampled crop-space perturbation added back
  auto compose = [&](const RasterImage& xc) {
    RasterImage delta = xc;
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
      delta.data[i] = xc.data[i] - crop_ref.data[i];
    }
    RasterImage up = resize_to(delta, box.height, box.width);
    RasterImage full = source;
    for (int y = 0; y < box.height; ++y) {
      for (int x = 0; x < box.width; ++x) {
        for (int c = 0; c < ch; ++c) {
          float& v = full.at(box.y + y, box.x + x, c);
          v = static_cast<float>(std::clamp(static_cast<double>(v) + up.at(y, x, c), 0.0, 1.0));
        }
      }
    }
    return full;
  };

  PgdResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    RasterImage full = compose(x_crop);
    RasterImage g_full = surrogate.gradient_log_confidence(full, target_id);
    // pull the gradient back through the box crop and the bilinear upsample
    RasterImage g_region = crop_image(g_full, box);
    RasterImage g_crop = RasterImage::filled(cfg.crop_size, cfg.crop_size, ch, 0.0f);
    {
      std::vector<double> dst(static_cast<std::size_t>(box.height) * box.width);
      std::vector<double> src(static_cast<std::size_t>(cfg.crop_size) * cfg.crop_size);
      for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < box.height; ++y) {
          for (int x = 0; x < box.width; ++x) {
            dst[static_cast<std::size_t>(y) * box.width + x] = g_region.at(y, x, c);
          }
        }
        std::fill(src.begin(), src.end(), 0.0);
        resample_plane_adjoint(dst.data(), box.height, box.width, src.data(), cfg.crop_size,
                               cfg.crop_size);
        for (int y = 0; y < cfg.crop_size; ++y) {
          for (int x = 0; x < cfg.crop_size; ++x) {
            g_crop.at(y, x, c) = static_cast<float>(src[static_cast<std::size_t>(y) *
                                                        cfg.crop_size + x]);
          }
        }
      }
    }
    x_crop = pgd_step(x_crop, g_crop, cfg.step_size);
    if (cfg.project_each_step && ssim(source, compose(x_crop)) < cfg.ssim_floor) {
      // bisect the crop-space shrink factor against the recomposed image, so
      // the clipping inside compose cannot push the iterate back below floor
      auto scaled = [&](double lambda) {
        RasterImage xc = x_crop;
        for (std::size_t i = 0; i < xc.data.size(); ++i) {
          xc.data[i] = static_cast<float>(crop_ref.data[i] +
                                          lambda * (x_crop.data[i] - crop_ref.data[i]));
        }
        return xc;
      };
      double lo = 0.0;  // compose(scaled(0)) == source, always feasible
      double hi = 1.0;
      for (int it = 0; it < 30; ++it) {
        double mid = 0.5 * (lo + hi);
        if (ssim(source, compose(scaled(mid))) >= cfg.ssim_floor) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      x_crop = scaled(lo);
    }
    RasterImage after = compose(x_crop);
    result.trace.push_back({surrogate.classify(after)[target_id], ssim(after, source)});
  }

  RasterImage final_full = compose(x_crop);
  result.image = ssim_project(source, final_full, cfg.ssim_floor, cfg.ssim_tolerance);
  result.final_ssim = ssim(result.image, source);
  result.final_probabilities = surrogate.classify(result.image);
  int argmax = static_cast<int>(std::max_element(result.final_probabilities.begin(),
                                                 result.final_probabilities.end()) -
                                result.final_probabilities.begin());
  bool strict = true;
  for (int c = 0; c < static_cast<int>(result.final_probabilities.size()); ++c) {
    if (c != target_id &&
        result.final_probabilities[c] >= result.final_probabilities[target_id]) {
      strict = false;
    }
  }
  result.argmax_is_target = strict && argmax == target_id;
  if (eval_oracle != nullptr) {
    result.transfer = eval_oracle->query(result.image, source_id, target_id);
  }
  return result;
}

}  // namespace facepaste
