#include "facepaste/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "facepaste/errors.hpp"
#include "facepaste/rng.hpp"

namespace facepaste {

namespace {

constexpr double kPi = 3.14159265358979323846;

double matern52(double dist, double lengthscale) {
  double t = std::sqrt(5.0) * dist / lengthscale;
  return (1.0 + t + t * t / 3.0) * std::exp(-t);
}

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

struct GpModel::Impl {
  Eigen::MatrixXd X;        // n x d, in [0,1]^d
  Eigen::VectorXd ys;       // standardized targets
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;    // (K + noise I)^-1 ys
  GpHyperParams hp;
  double y_mean = 0.0;
  double y_std = 1.0;
  double lml = 0.0;
  double jitter = 0.0;

  // correlation matrix at unit signal variance
  static Eigen::MatrixXd correlation(const Eigen::MatrixXd& dist, double lengthscale) {
    Eigen::MatrixXd r(dist.rows(), dist.cols());
    for (Eigen::Index i = 0; i < dist.rows(); ++i) {
      for (Eigen::Index j = 0; j < dist.cols(); ++j) {
        r(i, j) = matern52(dist(i, j), lengthscale);
      }
    }
    return r;
  }

  // Cholesky with escalating jitter; false when even the maximum fails
  static bool factor(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>* llt,
                     double* jitter_used) {
    llt->compute(k);
    if (llt->info() == Eigen::Success) {
      *jitter_used = 0.0;
      return true;
    }
    for (double jitter = 1e-8; jitter <= 1e-4 * (1.0 + 1e-12); jitter *= 10.0) {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jitter;
      llt->compute(kj);
      if (llt->info() == Eigen::Success) {
        *jitter_used = jitter;
        return true;
      }
    }
    return false;
  }

  static double marginal_likelihood(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                    const Eigen::VectorXd& ys, const Eigen::VectorXd& alpha) {
    double log_det = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
    return -0.5 * ys.dot(alpha) - log_det -
           0.5 * static_cast<double>(ys.size()) * std::log(2.0 * kPi);
  }
};

GpModel::GpModel() : impl_(std::make_unique<Impl>()) {}
GpModel::GpModel(GpModel&&) noexcept = default;
GpModel& GpModel::operator=(GpModel&&) noexcept = default;
GpModel::~GpModel() = default;

std::vector<GpHyperParams> GpModel::hyperparameter_grid() {
  std::vector<GpHyperParams> grid;
  for (int i = 0; i < 16; ++i) {
    double ls = 0.05 * std::pow(2.0 / 0.05, i / 15.0);
    for (double sf : {0.25, 1.0, 4.0}) {
      for (double sn : {1e-6, 1e-4, 1e-2}) {
        grid.push_back({ls, sf, sn});
      }
    }
  }
  return grid;
}

namespace {

struct StandardizedTargets {
  Eigen::VectorXd ys;
  double mean;
  double std_dev;   // 1.0 when degenerate
  bool degenerate;
};

StandardizedTargets standardize(const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  double mean = v.mean();
  double var = (v.array() - mean).square().sum() / static_cast<double>(n);
  double sd = std::sqrt(var);
  if (sd < 1e-12) {
    return {Eigen::VectorXd::Zero(n), mean, 1.0, true};
  }
  return {((v.array() - mean) / sd).matrix(), mean, sd, false};
}

Eigen::MatrixXd build_design(const std::vector<std::vector<double>>& X) {
  if (X.empty()) {
    throw InvalidParameterError("GP needs at least one observation");
  }
  const auto n = static_cast<Eigen::Index>(X.size());
  const auto d = static_cast<Eigen::Index>(X.front().size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(X[i].size()) != d) {
      throw InvalidParameterError("GP design points have mixed dimensions");
    }
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = X[i][j];
  }
  return m;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double dist = (x.row(i) - x.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

}  // namespace

GpModel GpModel::with_params(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y, GpHyperParams hp) {
  if (X.size() != y.size()) {
    throw InvalidParameterError("GP design/target size mismatch");
  }
  GpModel model;
  Impl& im = *model.impl_;
  im.X = build_design(X);
  StandardizedTargets st = standardize(y);
  im.ys = st.ys;
  im.y_mean = st.mean;
  im.y_std = st.std_dev;
  im.hp = hp;
  Eigen::MatrixXd dist = pairwise_distances(im.X);
  Eigen::MatrixXd k = hp.signal_var * Impl::correlation(dist, hp.lengthscale);
  k.diagonal().array() += hp.noise_var;
  if (!Impl::factor(k, &im.llt, &im.jitter)) {
    throw InvalidParameterError("GP covariance is not positive definite");
  }
  im.alpha = im.llt.solve(im.ys);
  im.lml = Impl::marginal_likelihood(im.llt, im.ys, im.alpha);
  return model;
}

GpModel GpModel::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
  if (X.size() < 2) {
    throw InvalidParameterError("GP fit needs at least two observations");
  }
  if (X.size() != y.size()) {
    throw InvalidParameterError("GP design/target size mismatch");
  }
  StandardizedTargets st = standardize(y);
  if (st.degenerate) {
    return with_params(X, y, {1.0, 1e-6, 1e-6});
  }

  GpModel model;
  Impl& im = *model.impl_;
  im.X = build_design(X);
  im.ys = st.ys;
  im.y_mean = st.mean;
  im.y_std = st.std_dev;

  Eigen::MatrixXd dist = pairwise_distances(im.X);
  double best_lml = -std::numeric_limits<double>::infinity();
  GpHyperParams best_hp;
  bool found = false;
  for (int i = 0; i < 16; ++i) {
    double ls = 0.05 * std::pow(2.0 / 0.05, i / 15.0);
    Eigen::MatrixXd corr = Impl::correlation(dist, ls);
    for (double sf : {0.25, 1.0, 4.0}) {
      for (double sn : {1e-6, 1e-4, 1e-2}) {
        Eigen::MatrixXd k = sf * corr;
        k.diagonal().array() += sn;
        Eigen::LLT<Eigen::MatrixXd> llt;
        double jitter = 0.0;
        if (!Impl::factor(k, &llt, &jitter)) continue;
        Eigen::VectorXd alpha = llt.solve(im.ys);
        double lml = Impl::marginal_likelihood(llt, im.ys, alpha);
        if (lml > best_lml) {
          best_lml = lml;
          best_hp = {ls, sf, sn};
          found = true;
        }
      }
    }
  }
  if (!found) {
    throw InvalidParameterError("no GP hyperparameter combination factorized");
  }
  im.hp = best_hp;
  Eigen::MatrixXd k = best_hp.signal_var * Impl::correlation(dist, best_hp.lengthscale);
  k.diagonal().array() += best_hp.noise_var;
  Impl::factor(k, &im.llt, &im.jitter);
  im.alpha = im.llt.solve(im.ys);
  im.lml = Impl::marginal_likelihood(im.llt, im.ys, im.alpha);
  return model;
}

GpPrediction GpModel::predict(const std::vector<double>& x) const {
  const Impl& im = *impl_;
  if (static_cast<Eigen::Index>(x.size()) != im.X.cols()) {
    throw InvalidParameterError("predict point has wrong dimension");
  }
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd k(im.X.rows());
  for (Eigen::Index i = 0; i < im.X.rows(); ++i) {
    k(i) = im.hp.signal_var * matern52((im.X.row(i).transpose() - xv).norm(), im.hp.lengthscale);
  }
  double mean_std = k.dot(im.alpha);
  Eigen::VectorXd v = im.llt.matrixL().solve(k);
  double var_std = im.hp.signal_var + im.hp.noise_var - v.squaredNorm();
  var_std = std::max(0.0, var_std);
  return {im.y_mean + im.y_std * mean_std, im.y_std * im.y_std * var_std};
}

std::vector<GpPrediction> GpModel::predict_batch(const std::vector<double>& flat_points,
                                                 int count) const {
  const Impl& im = *impl_;
  const Eigen::Index d = im.X.cols();
  const Eigen::Index n = im.X.rows();
  const Eigen::Index m = count;
  if (m < 0 || static_cast<Eigen::Index>(flat_points.size()) != m * d) {
    throw InvalidParameterError("batch size does not match point dimension");
  }
  std::vector<GpPrediction> out;
  if (m == 0) return out;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(
      flat_points.data(), m, d);
  // squared distances via the expansion ||a-b||^2 = ||a||^2 + ||b||^2 - 2ab;
  // cancellation error stays O(1e-15) in the kernel because matern52 is flat
  // at zero distance, so the cheap GEMM form is safe here
  Eigen::ArrayXXd d2 = (-2.0 * (im.X * c.transpose())).array();
  d2.colwise() += im.X.rowwise().squaredNorm().array();
  d2.rowwise() += c.rowwise().squaredNorm().transpose().array();
  Eigen::ArrayXXd t = (std::sqrt(5.0) / im.hp.lengthscale) * d2.max(0.0).sqrt();
  Eigen::MatrixXd kstar =
      (im.hp.signal_var * (1.0 + t + t.square() / 3.0) * (-t).exp()).matrix();
  Eigen::VectorXd means = kstar.transpose() * im.alpha;
  im.llt.matrixL().solveInPlace(kstar);
  Eigen::VectorXd vars = (im.hp.signal_var + im.hp.noise_var -
                          kstar.colwise().squaredNorm().transpose().array())
                             .max(0.0)
                             .matrix();
  out.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    out.push_back({im.y_mean + im.y_std * means(i), im.y_std * im.y_std * vars(i)});
  }
  return out;
}

const GpHyperParams& GpModel::params() const { return impl_->hp; }
double GpModel::log_marginal_likelihood() const { return impl_->lml; }
double GpModel::target_mean() const { return impl_->y_mean; }
double GpModel::target_std() const { return impl_->y_std; }
int GpModel::dim() const { return static_cast<int>(impl_->X.cols()); }
int GpModel::size() const { return static_cast<int>(impl_->X.rows()); }

double expected_improvement(double mean, double variance, double best) {
  if (variance <= 0.0) {
    return std::max(0.0, mean - best);
  }
  double sigma = std::sqrt(variance);
  double z = (mean - best) / sigma;
  return (mean - best) * norm_cdf(z) + sigma * norm_pdf(z);
}

std::vector<double> suggest_next(const GpModel& model, const std::vector<double>& incumbent,
                                 double best_value, std::mt19937_64& rng,
                                 const SuggestOptions& opts) {
  const int d = model.dim();
  const int total = opts.uniform_candidates + opts.local_candidates;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(total) * d);
  for (int i = 0; i < opts.uniform_candidates; ++i) {
    for (int j = 0; j < d; ++j) flat.push_back(uniform01(rng));
  }
  for (int i = 0; i < opts.local_candidates; ++i) {
    for (int j = 0; j < d; ++j) {
      flat.push_back(std::clamp(incumbent[j] + opts.local_std * normal01(rng), 0.0, 1.0));
    }
  }
  std::vector<GpPrediction> preds = model.predict_batch(flat, total);
  double best_ei = -1.0;
  int best_i = -1;
  for (int i = 0; i < total; ++i) {
    double ei = expected_improvement(preds[i].mean, preds[i].variance, best_value);
    if (ei > best_ei) {
      best_ei = ei;
      best_i = i;
    }
  }
  if (best_i < 0 || best_ei <= opts.min_ei) {
    std::vector<double> fallback(d);
    for (int j = 0; j < d; ++j) fallback[j] = uniform01(rng);
    return fallback;
  }
  return std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(best_i) * d,
                             flat.begin() + static_cast<std::ptrdiff_t>(best_i + 1) * d);
}

BoRunResult maximize(int dim, const std::function<double(const std::vector<double>&)>& fn,
                     const BoOptions& opts, std::mt19937_64& rng) {
  if (dim <= 0 || opts.init_queries <= 0 || opts.init_queries >= opts.budget) {
    throw InvalidParameterError("need dim > 0 and 0 < init_queries < budget");
  }
  BoRunResult run;
  auto record = [&](std::vector<double> x) {
    double value = fn(x);
    run.history.push_back({std::move(x), value});
    if (run.best_index < 0 || value > run.history[run.best_index].value) {
      run.best_index = static_cast<int>(run.history.size()) - 1;
    }
  };
  for (int i = 0; i < opts.init_queries; ++i) {
    std::vector<double> x(dim);
    for (int j = 0; j < dim; ++j) x[j] = uniform01(rng);
    record(std::move(x));
  }
  while (static_cast<int>(run.history.size()) < opts.budget) {
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    xs.reserve(run.history.size());
    ys.reserve(run.history.size());
    for (const BoPoint& p : run.history) {
      xs.push_back(p.x);
      ys.push_back(p.value);
    }
    GpModel model = GpModel::fit(xs, ys);
    const BoPoint& incumbent = run.history[run.best_index];
    record(suggest_next(model, incumbent.x, incumbent.value, rng, opts.suggest));
  }
  return run;
}

std::vector<double> normalize_point(const std::vector<double>& p, const ParamBounds& b) {
  if (p.size() != b.lower.size()) {
    throw InvalidParameterError("point dimension does not match bounds");
  }
  std::vector<double> u(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < b.lower[i] || p[i] > b.upper[i]) {
      throw InvalidParameterError("point outside bounds");
    }
    u[i] = (p[i] - b.lower[i]) / (b.upper[i] - b.lower[i]);
  }
  return u;
}

std::vector<double> denormalize_point(const std::vector<double>& u, const ParamBounds& b) {
  if (u.size() != b.lower.size()) {
    throw InvalidParameterError("point dimension does not match bounds");
  }
  std::vector<double> p(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    p[i] = b.lower[i] + u[i] * (b.upper[i] - b.lower[i]);
  }
  return p;
}

std::vector<double> normalize_params(const PasteParams& p, const ParamBounds& b) {
  return normalize_point(params_to_vector(p), b);
}

PasteParams denormalize_params(const std::vector<double>& u, const ParamBounds& b) {
  return params_from_vector(denormalize_point(u, b), b.mask_mode);
}

BoState optimize(const AttackSpec& spec, Oracle& oracle, const FaceSet& faces,
                 const MaskSet& masks, std::uint64_t seed, const QueryCallback& on_query) {
  spec.validate();
  BoState state;
  state.bounds = default_bounds(faces, spec.mask_mode);
  state.rng_seed = seed;
  state.best_objective = -std::numeric_limits<double>::infinity();

  BudgetedOracle budgeted(oracle, spec.budget);
  std::mt19937_64 rng(seed);

  auto evaluate = [&](const std::vector<double>& u) -> double {
    PasteParams p = denormalize_params(u, state.bounds);
    RasterImage img = render(faces, masks, spec.source_id, spec.target_id, p);
    QueryResult r = budgeted.query(img, spec.source_id, spec.target_id);
    BoObservation obs{p, r, objective(r)};
    state.history.push_back(obs);
    if (obs.objective > state.best_objective) {
      state.best_objective = obs.objective;
      state.best_index = static_cast<int>(state.history.size()) - 1;
    }
    if (on_query) on_query(obs);
    return obs.objective;
  };

  BoOptions opts;
  opts.budget = spec.budget;
  opts.init_queries = spec.init_queries;
  try {
    maximize(state.bounds.dim(), evaluate, opts, rng);
  } catch (const BudgetExhaustedError& e) {
    state.error = e.what();
  } catch (const TransportError& e) {
    state.error = e.what();
  }
  return state;
}

}  // namespace facepaste
