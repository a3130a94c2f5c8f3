#include "facepaste/paste_attack.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"

namespace facepaste {

std::string to_string(MaskMode mode) {
  return mode == MaskMode::manual ? "manual" : "auto";
}

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "manual") return MaskMode::manual;
  if (s == "auto" || s == "automatic") return MaskMode::automatic;
  throw InvalidParameterError("unknown mask mode: " + s);
}

void AttackSpec::validate() const {
  if (source_id == target_id) {
    throw InvalidParameterError("attack requires source != target");
  }
  if (source_id < 0 || source_id >= kNumClasses || target_id < 0 || target_id >= kNumClasses) {
    throw InvalidParameterError("class id out of range");
  }
  if (init_queries <= 0 || init_queries >= budget) {
    throw InvalidParameterError("need 0 < init_queries < budget");
  }
}

MaskSet build_mask_set(const FaceSet& faces, const std::string& mask_dir) {
  faces.validate();
  MaskSet set;
  for (int c = 0; c < kNumClasses; ++c) {
    AlphaMask manual;
    bool loaded = false;
    if (!mask_dir.empty()) {
      std::filesystem::path p =
          std::filesystem::path(mask_dir) / ("mask_" + std::to_string(c) + ".png");
      if (std::filesystem::exists(p)) {
        manual = load_mask(p.string());
        if (manual.height != faces.height() || manual.width != faces.width()) {
          throw ConfigError("mask dimensions do not match faces: " + p.string());
        }
        loaded = true;
      }
    }
    if (!loaded) {
      manual = default_manual_mask(faces.height(), faces.width());
    }
    set.manual.push_back(std::move(manual));
    set.automatic.push_back(auto_mask(faces.images[c]));
  }
  return set;
}

RasterImage render(const FaceSet& faces, const MaskSet& masks, int source_id, int target_id,
                   const PasteParams& params) {
  const RasterImage& target = faces.images[target_id];

  AlphaMask base_mask;
  if (params.mask_mode == MaskMode::manual) {
    base_mask = sigmoid_mask(masks.manual[target_id], {params.bias, params.slope});
  } else {
    base_mask = blur_mask(masks.automatic[target_id], params.sigma);
  }

  RasterImage scaled_target = resize_bilinear(target, params.sx, params.sy);
  RasterImage scaled_mask = resize_bilinear(mask_to_image(base_mask), params.sx, params.sy);
  RotatedRaster rot_target = rotate_bilinear(scaled_target, params.theta);
  RotatedRaster rot_mask = rotate_bilinear(scaled_mask, params.theta);

  AlphaMask alpha = AlphaMask::filled(rot_mask.image.height, rot_mask.image.width, 0.0f);
  for (int y = 0; y < alpha.height; ++y) {
    for (int x = 0; x < alpha.width; ++x) {
      alpha.at(y, x) = rot_mask.image.at(y, x) * rot_mask.valid.at(y, x);
    }
  }

  RasterImage out =
      paste(faces.images[source_id], rot_target.image, alpha, {params.cx, params.cy});
  return quantize8(out);
}

double objective(const QueryResult& r) {
  return r.confidence + std::min(0.5, r.stealthiness);
}

bool is_success(const QueryResult& r, int target_id) {
  if (r.stealthiness < 0.5) return false;
  if (r.probabilities) {
    const std::vector<double>& p = *r.probabilities;
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (static_cast<int>(c) == target_id) continue;
      if (p[c] >= p[target_id]) return false;  // ties count as failure
    }
    return true;
  }
  return r.confidence > 0.5;
}

ParamBounds default_bounds(const FaceSet& faces, MaskMode mode) {
  faces.validate();
  const double w = faces.width();
  const double h = faces.height();
  ParamBounds b;
  b.mask_mode = mode;
  b.lower = {-0.5 * w, -0.5 * h, 0.6, 0.6, -40.0};
  b.upper = {1.5 * w, 1.5 * h, 1.8, 1.8, 40.0};
  if (mode == MaskMode::manual) {
    b.lower.insert(b.lower.end(), {0.0, 5.0});
    b.upper.insert(b.upper.end(), {1.0, 40.0});
  } else {
    b.lower.push_back(0.0);
    b.upper.push_back(20.0);
  }
  return b;
}

std::vector<double> params_to_vector(const PasteParams& p) {
  std::vector<double> v = {p.cx, p.cy, p.sx, p.sy, p.theta};
  if (p.mask_mode == MaskMode::manual) {
    v.push_back(p.bias);
    v.push_back(p.slope);
  } else {
    v.push_back(p.sigma);
  }
  return v;
}

PasteParams params_from_vector(const std::vector<double>& v, MaskMode mode) {
  const std::size_t expected = mode == MaskMode::manual ? 7 : 6;
  if (v.size() != expected) {
    throw InvalidParameterError("parameter vector has wrong dimension");
  }
  PasteParams p;
  p.cx = v[0];
  p.cy = v[1];
  p.sx = v[2];
  p.sy = v[3];
  p.theta = v[4];
  p.mask_mode = mode;
  if (mode == MaskMode::manual) {
    p.bias = v[5];
    p.slope = v[6];
  } else {
    p.sigma = v[5];
  }
  return p;
}

}  // namespace facepaste
