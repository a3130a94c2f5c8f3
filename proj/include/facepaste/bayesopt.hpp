#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "facepaste/oracle.hpp"
#include "facepaste/paste_attack.hpp"

namespace facepaste {

struct GpHyperParams {
  double lengthscale = 1.0;
  double signal_var = 1.0;
  double noise_var = 1e-6;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Matern 5/2 GP over [0,1]^d with internally standardized targets
class GpModel {
 public:
  GpModel(GpModel&&) noexcept;
  GpModel& operator=(GpModel&&) noexcept;
  ~GpModel();

  // hyperparameters by log-marginal-likelihood grid search; n >= 2
  static GpModel fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y);
  static GpModel with_params(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y, GpHyperParams hp);

  // the MLL search grid: 16 log-spaced lengthscales in [0.05, 2] crossed with
  // signal variances {0.25, 1, 4} and noise variances {1e-6, 1e-4, 1e-2}
  static std::vector<GpHyperParams> hyperparameter_grid();

  GpPrediction predict(const std::vector<double>& x) const;

  // row-major flat points (count x dim); one blocked triangular solve instead
  // of count separate ones, which is what makes dense candidate scoring cheap
  std::vector<GpPrediction> predict_batch(const std::vector<double>& flat_points,
                                          int count) const;

  const GpHyperParams& params() const;
  double log_marginal_likelihood() const;  // of the standardized targets
  double target_mean() const;
  double target_std() const;  // 1 when the targets were degenerate (all equal)
  int dim() const;
  int size() const;

 private:
  GpModel();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// EI = (mu - best) * Phi(z) + sigma * phi(z); max(0, mu - best) at sigma = 0
double expected_improvement(double mean, double variance, double best);

struct SuggestOptions {
  int uniform_candidates = 4096;
  int local_candidates = 64;
  double local_std = 0.05;   // per-dim Gaussian perturbation around the incumbent
  double min_ei = 1e-16;     // at or below: fall back to a fresh uniform point
};

// EI argmax over random candidates in [0,1]^d
std::vector<double> suggest_next(const GpModel& model, const std::vector<double>& incumbent,
                                 double best_value, std::mt19937_64& rng,
                                 const SuggestOptions& opts = {});

struct BoOptions {
  int budget = 200;
  int init_queries = 50;
  SuggestOptions suggest;
};

struct BoPoint {
  std::vector<double> x;  // normalized
  double value = 0.0;
};

struct BoRunResult {
  std::vector<BoPoint> history;
  int best_index = -1;
};

// generic budgeted maximization over [0,1]^dim: uniform random init phase,
// then fit + suggest + evaluate until the budget is spent. Exceptions from fn
// propagate to the caller.
BoRunResult maximize(int dim, const std::function<double(const std::vector<double>&)>& fn,
                     const BoOptions& opts, std::mt19937_64& rng);

// bounds mapping between parameter space and the unit box
std::vector<double> normalize_point(const std::vector<double>& p, const ParamBounds& b);
std::vector<double> denormalize_point(const std::vector<double>& u, const ParamBounds& b);
std::vector<double> normalize_params(const PasteParams& p, const ParamBounds& b);
PasteParams denormalize_params(const std::vector<double>& u, const ParamBounds& b);

struct BoObservation {
  PasteParams params;
  QueryResult result;
  double objective = 0.0;
};

struct BoState {
  ParamBounds bounds;
  std::vector<BoObservation> history;
  double best_objective = 0.0;
  int best_index = -1;
  std::uint64_t rng_seed = 0;
  std::string error;  // nonempty when the attack stopped on budget/transport
};

using QueryCallback = std::function<void(const BoObservation&)>;

// one full attack campaign: render + query loop under the spec budget;
// on_query fires after every oracle response (the persistence hook)
BoState optimize(const AttackSpec& spec, Oracle& oracle, const FaceSet& faces,
                 const MaskSet& masks, std::uint64_t seed, const QueryCallback& on_query = {});

}  // namespace facepaste
