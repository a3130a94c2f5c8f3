#include "facepaste/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <tuple>

#include <httplib.h>
#include <json.hpp>

#include "facepaste/errors.hpp"
#include "facepaste/png_io.hpp"

namespace facepaste {

using nlohmann::json;

namespace {

void check_class_id(int id, const char* what) {
  if (id < 0 || id >= kNumClasses) {
    throw InvalidParameterError(std::string(what) + " out of range");
  }
}

std::vector<double> gray_plane(const RasterImage& img) {
  std::vector<double> g(img.pixel_count());
  if (img.channels == 3) {
    for (std::size_t p = 0; p < g.size(); ++p) {
      g[p] = 0.299 * img.data[p * 3] + 0.587 * img.data[p * 3 + 1] + 0.114 * img.data[p * 3 + 2];
    }
  } else if (img.channels == 1) {
    for (std::size_t p = 0; p < g.size(); ++p) g[p] = img.data[p];
  } else {
    throw InvalidParameterError("oracle expects 1- or 3-channel images");
  }
  return g;
}

std::vector<double> softmax_scaled(const std::vector<double>& s, double temperature) {
  double m = temperature * *std::max_element(s.begin(), s.end());
  std::vector<double> p(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(temperature * s[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> class_probabilities(const std::vector<double>& e,
                                        const std::vector<std::vector<double>>& templates,
                                        double temperature) {
  std::vector<double> s(templates.size());
  for (std::size_t c = 0; c < templates.size(); ++c) {
    double dot = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) dot += e[i] * templates[c][i];
    s[c] = dot;
  }
  return softmax_scaled(s, temperature);
}

}  // namespace

std::vector<double> embed_image(const RasterImage& img, int embed_size) {
  if (embed_size < 8) {
    throw InvalidParameterError("embed_size must be at least 8");
  }
  std::vector<double> gray = gray_plane(img);
  std::vector<double> z(static_cast<std::size_t>(embed_size) * embed_size);
  resample_plane(gray.data(), img.height, img.width, z.data(), embed_size, embed_size);
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : z) v /= norm;
  }
  return z;
}

std::vector<double> classify(const RasterImage& img, const FaceSet& faces,
                             const SimOracleConfig& cfg) {
  faces.validate();
  std::vector<std::vector<double>> templates;
  templates.reserve(faces.images.size());
  for (const RasterImage& f : faces.images) templates.push_back(embed_image(f, cfg.embed_size));
  return class_probabilities(embed_image(img, cfg.embed_size), templates, cfg.temperature);
}

SimulatedOracle::SimulatedOracle(FaceSet faces, SimOracleConfig cfg)
    : faces_(std::move(faces)), cfg_(cfg) {
  faces_.validate();
  if (cfg_.temperature <= 0.0) {
    throw InvalidParameterError("temperature must be positive");
  }
  templates_.reserve(faces_.images.size());
  for (const RasterImage& f : faces_.images) {
    templates_.push_back(embed_image(f, cfg_.embed_size));
  }
}

std::vector<double> SimulatedOracle::classify(const RasterImage& img) const {
  return class_probabilities(embed_image(img, cfg_.embed_size), templates_, cfg_.temperature);
}

QueryResult SimulatedOracle::query(const RasterImage& img, int source_id, int target_id) {
  check_class_id(source_id, "source_id");
  check_class_id(target_id, "target_id");
  if (source_id == target_id) {
    throw InvalidParameterError("source and target class must differ");
  }
  QueryResult r;
  r.probabilities = classify(img);
  r.confidence = (*r.probabilities)[target_id];
  r.stealthiness = ssim(img, faces_.images[source_id]);
  return r;
}

RasterImage SimulatedOracle::gradient_log_confidence(const RasterImage& img,
                                                     int target_id) const {
  check_class_id(target_id, "target_id");
  const int n = cfg_.embed_size;
  const int h = img.height;
  const int w = img.width;
  std::vector<double> gray = gray_plane(img);
  std::vector<double> z(static_cast<std::size_t>(n) * n);
  resample_plane(gray.data(), h, w, z.data(), n, n);
  double norm = 0.0;
  for (double v : z) norm += v * v;
  norm = std::sqrt(norm);
  RasterImage grad = RasterImage::filled(h, w, img.channels, 0.0f);
  if (norm == 0.0) return grad;

  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) e[i] = z[i] / norm;
  std::vector<double> p = class_probabilities(e, templates_, cfg_.temperature);

  // d log p_t / d e = sum_c tau * (1{c=t} - p_c) * template_c
  std::vector<double> u(z.size(), 0.0);
  for (std::size_t c = 0; c < templates_.size(); ++c) {
    double coef = cfg_.temperature * ((static_cast<int>(c) == target_id ? 1.0 : 0.0) - p[c]);
    const std::vector<double>& t = templates_[c];
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += coef * t[i];
  }
  // normalization Jacobian: d e / d z = I/|z| - z z^T / |z|^3
  double zu = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) zu += z[i] * u[i];
  std::vector<double> dz(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    dz[i] = u[i] / norm - z[i] * zu / (norm * norm * norm);
  }
  std::vector<double> dgray(gray.size(), 0.0);
  resample_plane_adjoint(dz.data(), n, n, dgray.data(), h, w);

  if (img.channels == 3) {
    for (std::size_t pix = 0; pix < dgray.size(); ++pix) {
      grad.data[pix * 3] = static_cast<float>(0.299 * dgray[pix]);
      grad.data[pix * 3 + 1] = static_cast<float>(0.587 * dgray[pix]);
      grad.data[pix * 3 + 2] = static_cast<float>(0.114 * dgray[pix]);
    }
  } else {
    for (std::size_t pix = 0; pix < dgray.size(); ++pix) {
      grad.data[pix] = static_cast<float>(dgray[pix]);
    }
  }
  return grad;
}

BudgetedOracle::BudgetedOracle(Oracle& inner, int budget) : inner_(inner), budget_(budget) {
  if (budget <= 0) {
    throw InvalidParameterError("budget must be positive");
  }
}

QueryResult BudgetedOracle::query(const RasterImage& img, int source_id, int target_id) {
  int idx = used_.fetch_add(1) + 1;
  if (idx > budget_) {
    used_.store(budget_);
    throw BudgetExhaustedError("query budget exhausted", budget_);
  }
  QueryResult r = inner_.query(img, source_id, target_id);
  r.query_index = idx;
  return r;
}

struct RemoteOracle::Client {
  httplib::Client http;
  explicit Client(const std::string& url) : http(url) {
    http.set_connection_timeout(10, 0);
    http.set_read_timeout(30, 0);
  }
};

RemoteOracle::RemoteOracle(RemoteOracleConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.url.empty()) {
    throw ConfigError("remote oracle URL is empty");
  }
  if (cfg_.api_key.empty()) {
    if (const char* env = std::getenv("FACEPASTE_API_KEY")) cfg_.api_key = env;
  }
  client_ = std::make_unique<Client>(cfg_.url);
}

RemoteOracle::~RemoteOracle() = default;

QueryResult RemoteOracle::query(const RasterImage& img, int source_id, int target_id) {
  json body;
  body["image_png_b64"] = base64_encode(encode_png(img));
  body["source_id"] = source_id;
  body["target_id"] = target_id;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg_.api_key.empty()) {
    headers.emplace("X-Api-Key", cfg_.api_key);
  }

  httplib::Result res;
  for (int attempt = 0;; ++attempt) {
    res = client_->http.Post("/query", headers, payload, "application/json");
    if (res) break;
    if (attempt >= cfg_.max_retries) {
      throw TransportError("query failed after " + std::to_string(attempt + 1) +
                           " attempts: " + httplib::to_string(res.error()));
    }
    auto delay = std::chrono::duration<double>(cfg_.backoff_initial_s * std::pow(2.0, attempt));
    std::this_thread::sleep_for(delay);
  }

  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception&) {
    parsed = json::object();
  }
  if (res->status == 429) {
    int used = parsed.value(cfg_.fields.queries_used, 0);
    throw BudgetExhaustedError("remote budget exhausted", used);
  }
  if (res->status == 400 || res->status == 404) {
    throw InvalidParameterError("remote rejected query: " +
                                parsed.value("error", std::string("HTTP ") +
                                                          std::to_string(res->status)));
  }
  if (res->status != 200) {
    throw TransportError("unexpected HTTP status " + std::to_string(res->status));
  }
  if (!parsed.contains(cfg_.fields.confidence) || !parsed.contains(cfg_.fields.stealthiness)) {
    throw TransportError("response missing confidence/stealthiness fields");
  }
  QueryResult r;
  r.confidence = parsed[cfg_.fields.confidence].get<double>();
  r.stealthiness = parsed[cfg_.fields.stealthiness].get<double>();
  if (parsed.contains(cfg_.fields.probabilities) && parsed[cfg_.fields.probabilities].is_array()) {
    r.probabilities = parsed[cfg_.fields.probabilities].get<std::vector<double>>();
  }
  r.query_index = parsed.value(cfg_.fields.queries_used, 0);
  return r;
}

struct OracleServer::Impl {
  SimulatedOracle oracle;
  int budget;
  httplib::Server server;
  std::thread worker;
  std::mutex mu;
  std::map<std::tuple<std::string, int, int>, int> counters;

  Impl(SimulatedOracle o, int b) : oracle(std::move(o)), budget(b) {}
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  json body;
  body["error"] = message;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

OracleServer::OracleServer(SimulatedOracle oracle, int budget)
    : impl_(std::make_unique<Impl>(std::move(oracle), budget)) {
  Impl* st = impl_.get();
  st->server.Post("/query", [st](const httplib::Request& req, httplib::Response& res) {
    std::string key = req.get_header_value("X-Api-Key");
    if (!key.empty()) {
      res.set_header("X-Api-Key", key);
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      send_error(res, 400, "request body is not valid JSON");
      return;
    }
    if (!body.contains("image_png_b64") || !body["image_png_b64"].is_string() ||
        !body.contains("source_id") || !body["source_id"].is_number_integer() ||
        !body.contains("target_id") || !body["target_id"].is_number_integer()) {
      send_error(res, 400, "expected image_png_b64, source_id, target_id");
      return;
    }
    int s = body["source_id"].get<int>();
    int t = body["target_id"].get<int>();
    if (s < 0 || s >= kNumClasses || t < 0 || t >= kNumClasses) {
      send_error(res, 404, "unknown class id");
      return;
    }
    if (s == t) {
      send_error(res, 400, "source and target class must differ");
      return;
    }
    RasterImage img;
    try {
      img = decode_png(base64_decode(body["image_png_b64"].get<std::string>()));
    } catch (const std::exception& e) {
      send_error(res, 400, std::string("bad image payload: ") + e.what());
      return;
    }
    int used = 0;
    {
      std::lock_guard<std::mutex> lock(st->mu);
      int& n = st->counters[{key, s, t}];
      if (st->budget > 0 && n >= st->budget) {
        json out;
        out["error"] = "budget exhausted";
        out["queries_used"] = n;
        res.status = 429;
        res.set_content(out.dump(), "application/json");
        return;
      }
      used = ++n;
    }
    QueryResult r;
    try {
      r = st->oracle.query(img, s, t);
    } catch (const std::exception& e) {
      send_error(res, 400, std::string("query rejected: ") + e.what());
      return;
    }
    json out;
    out["confidence"] = r.confidence;
    out["stealthiness"] = r.stealthiness;
    if (r.probabilities) {
      out["probabilities"] = *r.probabilities;
    }
    out["queries_used"] = used;
    res.set_content(out.dump(), "application/json");
  });
}

OracleServer::~OracleServer() { stop(); }

int OracleServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int chosen = impl_->server.bind_to_any_port(host);
    if (chosen < 0) {
      throw ConfigError("failed to bind " + host + " on any port");
    }
    return chosen;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw ConfigError("failed to bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void OracleServer::run() {
  if (!impl_->server.listen_after_bind()) {
    throw ConfigError("server terminated abnormally");
  }
}

void OracleServer::start_background() {
  Impl* st = impl_.get();
  st->worker = std::thread([st] { st->server.listen_after_bind(); });
  st->server.wait_until_ready();
}

void OracleServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) {
    impl_->worker.join();
  }
}

}  // namespace facepaste
