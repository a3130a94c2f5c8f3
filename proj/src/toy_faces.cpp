#include "facepaste/toy_faces.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"
#include "facepaste/rng.hpp"

namespace facepaste {

void FaceSet::validate() const {
  if (static_cast<int>(images.size()) != kNumClasses) {
    throw InvalidParameterError("face set must contain exactly 10 images");
  }
  for (const RasterImage& img : images) {
    if (!img.same_shape(images.front())) {
      throw InvalidParameterError("face set images must share dimensions");
    }
  }
  if (!face_boxes.empty() && face_boxes.size() != images.size()) {
    throw InvalidParameterError("face boxes must be absent or one per class");
  }
}

namespace {

constexpr int kFaceDim = 128;

struct Canvas {
  int h, w;
  std::vector<double> rgb;  // interleaved

  Canvas(int h_, int w_) : h(h_), w(w_), rgb(static_cast<std::size_t>(h_) * w_ * 3, 0.0) {}

  double* px(int y, int x) { return &rgb[(static_cast<std::size_t>(y) * w + x) * 3]; }
};

// antialiased ellipse blend; edge is the ramp width in pixels
void fill_ellipse(Canvas& c, double cx, double cy, double rx, double ry, double cr, double cg,
                  double cb, double edge = 1.0) {
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ry - edge - 1)));
  int y1 = std::min(c.h - 1, static_cast<int>(std::ceil(cy + ry + edge + 1)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - rx - edge - 1)));
  int x1 = std::min(c.w - 1, static_cast<int>(std::ceil(cx + rx + edge + 1)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double u = (x - cx) / rx;
      double v = (y - cy) / ry;
      double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry);
      double a = std::clamp(0.5 - d / edge, 0.0, 1.0);
      if (a <= 0.0) continue;
      double* p = c.px(y, x);
      p[0] = (1.0 - a) * p[0] + a * cr;
      p[1] = (1.0 - a) * p[1] + a * cg;
      p[2] = (1.0 - a) * p[2] + a * cb;
    }
  }
}

// upper half of an ellipse only; used for the hair cap
void fill_upper_ellipse(Canvas& c, double cx, double cy, double rx, double ry, double cr,
                        double cg, double cb) {
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ry - 2)));
  int y1 = std::min(c.h - 1, static_cast<int>(std::ceil(cy)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = std::max(0, static_cast<int>(cx - rx - 2));
         x <= std::min(c.w - 1, static_cast<int>(cx + rx + 2)); ++x) {
      double u = (x - cx) / rx;
      double v = (y - cy) / ry;
      double d = (std::sqrt(u * u + v * v) - 1.0) * std::min(rx, ry);
      double a = std::clamp(0.5 - d, 0.0, 1.0);
      if (a <= 0.0) continue;
      double* p = c.px(y, x);
      p[0] = (1.0 - a) * p[0] + a * cr;
      p[1] = (1.0 - a) * p[1] + a * cg;
      p[2] = (1.0 - a) * p[2] + a * cb;
    }
  }
}

RasterImage canvas_to_image(const Canvas& c) {
  RasterImage img = RasterImage::filled(c.h, c.w, 3, 0.0f);
  for (std::size_t i = 0; i < c.rgb.size(); ++i) {
    img.data[i] = static_cast<float>(intensity_to_byte(c.rgb[i]) / 255.0);
  }
  return img;
}

// complexion codes carry all class identity: ten smooth modes of the face
// oval, two rotation-invariant radial modes plus the first and second angular
// harmonics at two radial orders each. Every wavelength is at least half the
// face diameter, so code correlation decays slowly under paste misalignment,
// and the radial modes keep part of every identity stable under rotation.
constexpr int kCodeModes = 10;

double code_mode(int i, double rho, double phi) {
  double window = 1.0 - rho * rho;
  if (i < 2) {
    return window * std::cos(std::numbers::pi * (i + 1) * rho);
  }
  int j = i - 2;
  double radial = window * std::sin(std::numbers::pi * (1 + (j / 2) % 2) * rho);
  double angle = (1 + j / 4) * phi;
  return radial * (j % 2 == 0 ? std::cos(angle) : std::sin(angle));
}

// order-10 conference matrix: zero diagonal, every other entry +-1, rows
// mutually orthogonal. Scaled by 1/3 the rows are exactly orthonormal and
// every class spreads its deviation energy evenly over nine of the ten modes,
// so no class ends up with a systematically coarser or finer pattern than
// another. Seeded phase rotations within each angular-harmonic pair, a seeded
// class permutation, and seeded signs vary the realized identities per seed
// without disturbing that flat energy split.
std::array<std::array<double, kCodeModes>, kNumClasses> identity_codes(std::uint64_t seed) {
  static constexpr const char* kConference[kNumClasses] = {
      "0+++++++++", "+0+++--+--", "++0+-+--+-", "+++0--+--+", "++--0+++--",
      "+-+-+0+-+-", "+--+++0--+", "++--+--0++", "+-+--+-+0+", "+--+--+++0"};
  std::mt19937_64 rng(mix_seed(seed, 19));
  std::array<int, kNumClasses> order;
  for (int c = 0; c < kNumClasses; ++c) order[c] = c;
  std::shuffle(order.begin(), order.end(), rng);
  std::array<std::array<double, kCodeModes>, kNumClasses> g;
  for (int c = 0; c < kNumClasses; ++c) {
    for (int m = 0; m < kCodeModes; ++m) {
      char ch = kConference[order[c]][m];
      g[c][m] = ch == '0' ? 0.0 : (ch == '+' ? 1.0 : -1.0) / 3.0;
    }
  }
  for (int pair = 0; pair < 4; ++pair) {
    int a = 2 + 2 * pair;
    double psi = 2.0 * std::numbers::pi * uniform01(rng);
    double cs = std::cos(psi);
    double sn = std::sin(psi);
    for (auto& row : g) {
      double va = row[a];
      double vb = row[a + 1];
      row[a] = cs * va - sn * vb;
      row[a + 1] = sn * va + cs * vb;
    }
  }
  for (auto& row : g) {
    if (uniform01(rng) < 0.5) {
      for (double& v : row) v = -v;
    }
  }
  return g;
}

}  // namespace

FaceSet generate_toy_faces(std::uint64_t seed) {
  FaceSet set;
  set.images.reserve(kNumClasses);
  set.face_boxes.reserve(kNumClasses);

  // one shared portrait for all classes: silhouette, features, and palette are
  // identical, so no identity is an amplitude outlier, a pasted head changes
  // only complexion pixels against any source, and the classification race is
  // decided purely by the complexion codes
  std::mt19937_64 rng(mix_seed(seed, 0));
  double bg_r = 0.14 + 0.08 * uniform01(rng);
  double bg_g = 0.14 + 0.08 * uniform01(rng);
  double bg_b = 0.16 + 0.10 * uniform01(rng);

  const double cx = kFaceDim / 2.0;
  const double cy = kFaceDim / 2.0 - 2.0;
  const double rx = 41.0;
  const double ry = 49.0;

  double skin_r = 0.55 + 0.03 * uniform01(rng);
  double skin_g = skin_r * 0.78;
  double skin_b = skin_g * 0.72;
  double hair_r = 0.11 + 0.03 * uniform01(rng);
  double hair_g = hair_r * 0.85;
  double hair_b = hair_g * 0.8;
  const double hair_rx = rx + 6.0;
  const double hair_ry = ry * 0.62;
  const double hair_cy = cy - ry * 0.35;

  Canvas shared(kFaceDim, kFaceDim);
  for (int y = 0; y < kFaceDim; ++y) {
    double shade = 1.0 - 0.25 * y / (kFaceDim - 1);
    for (int x = 0; x < kFaceDim; ++x) {
      double* p = shared.px(y, x);
      p[0] = bg_r * shade;
      p[1] = bg_g * shade;
      p[2] = bg_b * shade;
    }
  }
  fill_upper_ellipse(shared, cx, hair_cy + hair_ry * 0.35, hair_rx, hair_ry, hair_r, hair_g,
                     hair_b);
  fill_ellipse(shared, cx, cy, rx, ry, skin_r, skin_g, skin_b, 1.5);
  // hairline cap over the forehead
  fill_upper_ellipse(shared, cx, cy - ry * 0.44, rx * 1.01, ry * 0.31, hair_r, hair_g, hair_b);

  const double eye_dx = rx * 0.36;
  const double eye_dy = ry * 0.17;
  const double eye_rx = 6.2;
  const double eye_ry = 3.6;
  // eyewear for everyone keeps the sharp feature mass equal across classes;
  // bridge bar first, then frames, eyeballs on top leave dark rings
  fill_ellipse(shared, cx, cy - eye_dy, eye_dx, 1.6, 0.10, 0.10, 0.12);
  for (int side : {-1, 1}) {
    double ex = cx + side * eye_dx;
    double ey = cy - eye_dy;
    fill_ellipse(shared, ex, ey, eye_rx + 4.0, eye_ry + 4.0, 0.10, 0.10, 0.12);
    fill_ellipse(shared, ex, ey, eye_rx, eye_ry, 0.93, 0.93, 0.92);
    fill_ellipse(shared, ex, ey, eye_ry * 0.62, eye_ry * 0.62, 0.20, 0.26, 0.40);
    // brow
    fill_ellipse(shared, ex, ey - eye_ry - 5.5, eye_rx * 1.1, 1.8, hair_r * 0.6, hair_g * 0.6,
                 hair_b * 0.6);
  }
  fill_ellipse(shared, cx, cy + ry * 0.10, 4.2, ry * 0.16, skin_r * 0.82, skin_g * 0.80,
               skin_b * 0.80);
  fill_ellipse(shared, cx, cy + ry * 0.50, 12.0, 3.2, 0.55, 0.18, 0.22);

  // code support: central face pixels with headroom to modulate both ways
  std::vector<int> sup_x, sup_y;
  std::vector<double> sup_luma;
  std::vector<std::vector<double>> basis(kCodeModes);
  for (int y = 0; y < kFaceDim; ++y) {
    for (int x = 0; x < kFaceDim; ++x) {
      double u = (x - cx) / rx;
      double v = (y - cy) / ry;
      double rho = std::sqrt(u * u + v * v);
      if (rho > 0.97) continue;
      const double* p = shared.px(y, x);
      double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      if (luma < 0.15 || luma > 0.85) continue;
      sup_x.push_back(x);
      sup_y.push_back(y);
      sup_luma.push_back(luma);
      double phi = std::atan2(v, u);
      for (int m = 0; m < kCodeModes; ++m) basis[m].push_back(code_mode(m, rho, phi));
    }
  }
  // orthonormalize the rendered luma patterns in the geometry the recognizer
  // actually compares: half-resolution block means, with the shared portrait
  // projected out. Every class then carries exactly the same deviation energy
  // after downsampling, the deviations stay orthogonal to the common face, and
  // no class template is systematically closer to an arbitrary composite.
  const std::size_t npix = sup_x.size();
  for (int m = 0; m < kCodeModes; ++m) {
    for (std::size_t p = 0; p < npix; ++p) basis[m][p] *= sup_luma[p];
  }
  const int half = kFaceDim / 2;
  auto downsample = [&](const std::vector<double>& sup_vals) {
    std::vector<double> out(static_cast<std::size_t>(half) * half, 0.0);
    for (std::size_t p = 0; p < npix; ++p) {
      out[static_cast<std::size_t>(sup_y[p] / 2) * half + sup_x[p] / 2] += 0.25 * sup_vals[p];
    }
    return out;
  };
  std::vector<std::vector<double>> low(kCodeModes);
  for (int m = 0; m < kCodeModes; ++m) low[m] = downsample(basis[m]);
  std::vector<double> shared_low = downsample(sup_luma);
  double shared_norm = 0.0;
  for (double v : shared_low) shared_norm += v * v;
  shared_norm = std::sqrt(shared_norm);
  for (double& v : shared_low) v /= shared_norm;
  for (int m = 0; m < kCodeModes; ++m) {
    double along = 0.0;
    for (std::size_t i = 0; i < low[m].size(); ++i) along += low[m][i] * shared_low[i];
    for (std::size_t i = 0; i < low[m].size(); ++i) low[m][i] -= along * shared_low[i];
    for (std::size_t p = 0; p < npix; ++p) basis[m][p] -= along * sup_luma[p] / shared_norm;
    for (int q = 0; q < m; ++q) {
      double dot = 0.0;
      for (std::size_t i = 0; i < low[m].size(); ++i) dot += low[m][i] * low[q][i];
      for (std::size_t i = 0; i < low[m].size(); ++i) low[m][i] -= dot * low[q][i];
      for (std::size_t p = 0; p < npix; ++p) basis[m][p] -= dot * basis[q][p];
    }
    double norm = 0.0;
    for (double v : low[m]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : low[m]) v /= norm;
    for (std::size_t p = 0; p < npix; ++p) basis[m][p] /= norm;
  }

  auto codes = identity_codes(seed);
  // deviation energy per class, measured in the downsampled geometry
  const double amplitude = 3.0;

  for (int c = 0; c < kNumClasses; ++c) {
    Canvas canvas = shared;
    for (std::size_t p = 0; p < npix; ++p) {
      double dev = 0.0;
      for (int m = 0; m < kCodeModes; ++m) dev += codes[c][m] * basis[m][p];
      double factor = 1.0 + amplitude * dev / sup_luma[p];
      double* px = canvas.px(sup_y[p], sup_x[p]);
      for (int ch = 0; ch < 3; ++ch) px[ch] = std::clamp(px[ch] * factor, 0.0, 1.0);
    }
    set.images.push_back(canvas_to_image(canvas));

    int bx0 = std::max(0, static_cast<int>(std::floor(cx - hair_rx - 2)));
    int bx1 = std::min(kFaceDim - 1, static_cast<int>(std::ceil(cx + hair_rx + 2)));
    int by0 = std::max(0, static_cast<int>(std::floor(hair_cy - hair_ry - 2)));
    int by1 = std::min(kFaceDim - 1, static_cast<int>(std::ceil(cy + ry + 2)));
    set.face_boxes.push_back(PixelRect{bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1});
  }

  set.validate();
  return set;
}

FaceSet load_faces(const std::string& dir) {
  FaceSet set;
  for (int c = 0; c < kNumClasses; ++c) {
    std::filesystem::path p = std::filesystem::path(dir) / ("face_" + std::to_string(c) + ".png");
    if (!std::filesystem::exists(p)) {
      throw ConfigError("missing face image: " + p.string());
    }
    set.images.push_back(read_png(p.string()));
  }
  set.validate();
  return set;
}

void write_faces(const FaceSet& faces, const std::string& dir) {
  faces.validate();
  std::filesystem::create_directories(dir);
  for (int c = 0; c < kNumClasses; ++c) {
    std::filesystem::path p = std::filesystem::path(dir) / ("face_" + std::to_string(c) + ".png");
    write_png(p.string(), faces.images[c]);
  }
}

}  // namespace facepaste
