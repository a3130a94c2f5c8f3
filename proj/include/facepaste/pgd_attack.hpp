#pragma once

#include <optional>
#include <vector>

#include "facepaste/oracle.hpp"
#include "facepaste/raster.hpp"
#include "facepaste/toy_faces.hpp"

namespace facepaste {

struct PgdConfig {
  double step_size = 2.0 / 255.0;
  int steps = 100;
  double ssim_floor = 0.5;
  double ssim_tolerance = 0.005;
  PixelRect crop_box;        // face rectangle in source coordinates
  int crop_size = 160;       // working resolution inside the crop
  bool project_each_step = false;

  void validate() const;
};

// face bounds from the generator when available, else a centered 70% box
PixelRect default_crop_box(const FaceSet& faces, int class_id);

// x' = clip_[0,1](x + eta * sign(grad)), with sign(0) = 0
RasterImage pgd_step(const RasterImage& x, const RasterImage& grad, double eta);

// shrink x toward x0 along the segment until ssim >= floor; lands within
// [floor, floor + tol] whenever the unprojected ssim is below the floor
RasterImage ssim_project(const RasterImage& x0, const RasterImage& x, double floor, double tol);

struct PgdStepTrace {
  double confidence = 0.0;   // surrogate p[target] after the step
  double ssim_value = 0.0;   // vs the source, full resolution
};

struct PgdResult {
  RasterImage image;               // final image after projection
  std::vector<PgdStepTrace> trace;
  double final_ssim = 0.0;
  std::vector<double> final_probabilities;  // surrogate classify of the final image
  bool argmax_is_target = false;
  std::optional<QueryResult> transfer;      // evaluation-oracle measurement
};

// sign-gradient ascent on the surrogate's log target probability inside the
// crop, perturbation upsampled back into the source, then SSIM projection at
// full resolution. eval_oracle, when given, scores the final image (the
// transfer measurement); it never contributes gradients.
PgdResult run_pgd(int source_id, int target_id, const SimulatedOracle& surrogate,
                  const PgdConfig& cfg, Oracle* eval_oracle = nullptr);

}  // namespace facepaste
