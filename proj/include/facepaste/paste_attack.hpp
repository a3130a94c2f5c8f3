#pragma once

#include <string>
#include <vector>

#include "facepaste/masks.hpp"
#include "facepaste/oracle.hpp"
#include "facepaste/raster.hpp"
#include "facepaste/toy_faces.hpp"

namespace facepaste {

enum class MaskMode { manual, automatic };

std::string to_string(MaskMode mode);            // "manual" / "auto"
MaskMode mask_mode_from_string(const std::string& s);

struct PasteParams {
  double cx = 0.0;
  double cy = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  double theta = 0.0;  // degrees
  MaskMode mask_mode = MaskMode::manual;
  double bias = 0.5;   // manual: sigmoid bias
  double slope = 20.0; // manual: sigmoid slope
  double sigma = 0.0;  // auto: blur radius
};

struct AttackSpec {
  int source_id = 0;
  int target_id = 1;
  MaskMode mask_mode = MaskMode::manual;
  int budget = 200;
  int init_queries = 50;

  void validate() const;  // s != t, 0 < init_queries < budget
};

// per-class base masks at face resolution: manual continuous, auto binary
struct MaskSet {
  std::vector<AlphaMask> manual;
  std::vector<AlphaMask> automatic;
};

// manual masks come from mask_<c>.png in mask_dir when present, else the
// built-in default; auto masks always from the segmentation heuristic
MaskSet build_mask_set(const FaceSet& faces, const std::string& mask_dir = "");

// shape mask -> transform target and mask with the same geometry -> paste
// onto the source -> snap to the 8-bit grid (wire parity with PNG round trips)
RasterImage render(const FaceSet& faces, const MaskSet& masks, int source_id, int target_id,
                   const PasteParams& params);

// confidence + min(0.5, stealthiness), in [0, 1.5]
double objective(const QueryResult& r);

// strict argmax when probabilities are present (ties fail), else the
// confidence > 0.5 proxy; stealthiness >= 0.5 either way
bool is_success(const QueryResult& r, int target_id);

struct ParamBounds {
  MaskMode mask_mode = MaskMode::manual;
  std::vector<double> lower;  // cx, cy, sx, sy, theta, then bias+slope or sigma
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
};

ParamBounds default_bounds(const FaceSet& faces, MaskMode mode);

std::vector<double> params_to_vector(const PasteParams& p);
PasteParams params_from_vector(const std::vector<double>& v, MaskMode mode);

}  // namespace facepaste
